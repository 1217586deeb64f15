use std::collections::BTreeSet;

use super::{Alphabet, Granularity, HtnaError, NodeClass, Result};
use crate::codes::TypedCorpus;
use crate::corpus::Corpus;

/// Interaction chains, one per chat, over a fixed state alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceSet {
    alphabet: Alphabet,
    granularity: Granularity,
    chains: Vec<Vec<usize>>,
    chat_ids: Vec<String>,
    owners: Vec<String>,
    group_label: Option<String>,
}

impl SequenceSet {
    /// Builds a set from labelled chains `(chat_id, student_id, states)`.
    pub fn from_labelled<I, S>(alphabet: Alphabet, granularity: Granularity, chains: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, String, Vec<S>)>,
        S: AsRef<str>,
    {
        let mut set = SequenceSet {
            alphabet,
            granularity,
            chains: Vec::new(),
            chat_ids: Vec::new(),
            owners: Vec::new(),
            group_label: None,
        };
        for (chat_id, owner, states) in chains {
            let chain = states
                .iter()
                .map(|s| {
                    set.alphabet
                        .index_of(s.as_ref())
                        .ok_or_else(|| HtnaError::UnknownState(s.as_ref().to_string()))
                })
                .collect::<Result<Vec<_>>>()?;
            if chain.is_empty() {
                return Err(HtnaError::EmptyChain {
                    chain: set.chains.len(),
                });
            }
            set.chains.push(chain);
            set.chat_ids.push(chat_id);
            set.owners.push(owner);
        }
        Ok(set)
    }

    pub fn with_group_label(mut self, label: impl Into<String>) -> Self {
        self.group_label = Some(label.into());
        self
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn granularity(&self) -> Granularity {
        self.granularity
    }

    /// Chains as indices into [`SequenceSet::alphabet`].
    pub fn chains(&self) -> &[Vec<usize>] {
        &self.chains
    }

    pub fn labelled_chain(&self, i: usize) -> Vec<&str> {
        self.chains[i].iter().map(|&s| self.alphabet.label(s)).collect()
    }

    pub fn chat_ids(&self) -> &[String] {
        &self.chat_ids
    }

    /// Student owning each chain.
    pub fn owners(&self) -> &[String] {
        &self.owners
    }

    pub fn group_label(&self) -> Option<&str> {
        self.group_label.as_deref()
    }

    pub fn len(&self) -> usize {
        self.chains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chains.is_empty()
    }

    pub fn n_tokens(&self) -> usize {
        self.chains.iter().map(Vec::len).sum()
    }

    pub fn node_class(&self, state: usize) -> NodeClass {
        self.alphabet.class(state)
    }
}

fn selected<'a>(owner: &str, filter: Option<&'a BTreeSet<String>>) -> bool {
    filter.is_none_or(|f| f.contains(owner))
}

/// One chain per chat with every element of every turn, in coded order.
pub fn build_element_sequences(
    corpus: &Corpus,
    membership: Option<&BTreeSet<String>>,
) -> Result<SequenceSet> {
    let alphabet = Granularity::Element.alphabet();
    let mut set = SequenceSet {
        alphabet,
        granularity: Granularity::Element,
        chains: Vec::new(),
        chat_ids: Vec::new(),
        owners: Vec::new(),
        group_label: None,
    };
    for (chat_id, turns) in corpus.chats() {
        let owner = &turns[0].student_id;
        if !selected(owner, membership) {
            continue;
        }
        let chain: Vec<usize> = turns
            .iter()
            .flat_map(|t| t.elements.iter().map(|e| e.index()))
            .collect();
        set.chains.push(chain);
        set.chat_ids.push(chat_id.to_string());
        set.owners.push(owner.clone());
    }
    if set.chains.is_empty() {
        return Err(HtnaError::EmptySelection);
    }
    Ok(set)
}

/// One chain per chat with one interaction-type state per turn.
pub fn build_type_sequences(
    typed: &TypedCorpus,
    membership: Option<&BTreeSet<String>>,
) -> Result<SequenceSet> {
    let corpus = typed.base();
    let mut set = SequenceSet {
        alphabet: Granularity::Type.alphabet(),
        granularity: Granularity::Type,
        chains: Vec::new(),
        chat_ids: Vec::new(),
        owners: Vec::new(),
        group_label: None,
    };
    for chat_id in corpus.chat_ids() {
        let range = corpus.chat_range(chat_id).expect("chat id from corpus");
        let owner = &corpus.turns()[range.start].student_id;
        if !selected(owner, membership) {
            continue;
        }
        let chain: Vec<usize> = typed.types()[range].iter().map(|t| t.index()).collect();
        set.chains.push(chain);
        set.chat_ids.push(chat_id.to_string());
        set.owners.push(owner.clone());
    }
    if set.chains.is_empty() {
        return Err(HtnaError::EmptySelection);
    }
    Ok(set)
}
