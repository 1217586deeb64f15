use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use helpseek_core::codes::{
    annotate_types, kappa_per_code, render_frequency_table, render_kappa_table, InteractionType, TypedCorpus,
};
use helpseek_core::corpus::{
    ingest_coded_turns, ingest_grades, parse_coded_turns, stratify_quartiles, stratify_with_sizes, Corpus,
    ElementCode, IngestOptions, Quartile,
};
use helpseek_core::htna::{
    build_element_sequences, build_type_sequences, export_comparison, export_network, fit_network_with,
    threshold_edges, ExportFormat, Granularity, SequenceSet, TransitionNetwork,
};
use helpseek_core::regress::{
    feature_proportions, fit_ols, render_regression_table, vif_filter, FeatureSource, ELEMENT_PRESET,
    TYPE_PRESET,
};
use helpseek_core::stats::{
    compare_edges, mine_patterns, render_edge_table, render_mosaic, render_pattern_table, residual_analysis,
    ContingencyTable, PatternConfig, PermutationConfig,
};

use crate::artifacts::{
    read_artifact, read_unchecked, write_artifact, write_text, ComparisonPayload, CorpusPayload, KappaPayload,
    Layout, NetworkPayload, PatternPayload, RegressPayload, ResidualPayload, TypedPayload,
};
use crate::config::{sha256_hex, InputDigests, PredictorSet};
use crate::{report, CliError, Command, PipelineConfig};

struct Io<'a> {
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
}

impl Io<'_> {
    fn say(&mut self, text: &str) {
        let _ = self.out.write_all(text.as_bytes());
        if !text.ends_with('\n') {
            let _ = self.out.write_all(b"\n");
        }
    }

    fn warn(&mut self, warnings: &[String]) {
        for w in warnings {
            let _ = writeln!(self.err, "warning: {w}");
        }
    }
}

pub fn run(command: Command, cfg: &PipelineConfig, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let mut io = Io { out, err };
    let layout = Layout::new(&cfg.out);
    match command {
        Command::Ingest => ingest(cfg, &layout, &mut io),
        Command::Classify => classify(cfg, &layout, &mut io),
        Command::Kappa => kappa(cfg, &layout, &mut io),
        Command::Fit => fit(cfg, &layout, &mut io),
        Command::Compare => compare(cfg, &layout, &mut io),
        Command::Residuals => residuals(cfg, &layout, &mut io),
        Command::Patterns => patterns(cfg, &layout, &mut io),
        Command::Regress => regress(cfg, &layout, &mut io),
        Command::ExportReport => {
            let written = report::export(cfg, &layout)?;
            for path in written {
                io.say(&format!("wrote {}", path.display()));
            }
            Ok(())
        }
    }
}

fn read_input(path: Option<&Path>, flag: &str, stage: &str) -> Result<Vec<u8>, CliError> {
    let path = path.ok_or_else(|| CliError::Config(format!("`{stage}` needs {flag}")))?;
    fs::read(path).map_err(|e| CliError::io(path, e))
}

/// The ingested corpus and the configuration hash it was produced under.
pub(crate) fn load_corpus(cfg: &PipelineConfig, layout: &Layout) -> Result<(CorpusPayload, String), CliError> {
    let path = layout.corpus();
    let env = read_unchecked::<CorpusPayload>(&path)?;
    let hash = cfg.hash(&env.payload.inputs);
    if env.config_hash != hash {
        return Err(CliError::StaleArtifact {
            path,
            found: env.config_hash,
            expected: hash,
            hint: "rerun `helpseek ingest` with the current flags and inputs".into(),
        });
    }
    Ok((env.payload, hash))
}

fn load_typed(layout: &Layout, corpus: &Corpus, hash: &str) -> Result<TypedCorpus, CliError> {
    let path = layout.typed();
    let stored: TypedPayload = read_artifact(&path, hash)?;
    let typed = annotate_types(corpus.clone())?;
    if typed.types() != stored.types.as_slice() {
        return Err(CliError::BadArtifact {
            path,
            message: "stored types disagree with the ingested corpus".into(),
        });
    }
    Ok(typed)
}

/// Everything a per-granularity stage needs.
struct Data {
    payload: CorpusPayload,
    typed: Option<TypedCorpus>,
    hash: String,
}

impl Data {
    fn load(cfg: &PipelineConfig, layout: &Layout) -> Result<Self, CliError> {
        let (payload, hash) = load_corpus(cfg, layout)?;
        let typed = match cfg.granularity {
            Granularity::Element => None,
            Granularity::Type => Some(load_typed(layout, &payload.corpus, &hash)?),
        };
        Ok(Data { payload, typed, hash })
    }

    fn has_chats(&self, q: Quartile) -> bool {
        self.payload
            .groups
            .members(q)
            .iter()
            .any(|s| !self.payload.corpus.chats_of(s).is_empty())
    }

    fn sequences(&self, q: Quartile) -> Result<SequenceSet, CliError> {
        let members = self.payload.groups.members(q);
        let set = match &self.typed {
            None => build_element_sequences(&self.payload.corpus, Some(&members)),
            Some(t) => build_type_sequences(t, Some(&members)),
        }
        .map_err(|e| match e {
            helpseek_core::htna::HtnaError::EmptySelection => {
                CliError::Stats(helpseek_core::stats::StatsError::EmptyGroup(q.to_string()))
            }
            other => other.into(),
        })?;
        Ok(set.with_group_label(q.to_string()))
    }

    fn code_counts(&self, q: Quartile) -> Vec<u64> {
        let members = self.payload.groups.members(q);
        match &self.typed {
            None => self.payload.corpus.element_counts(Some(&members)).to_vec(),
            Some(t) => t.type_counts(Some(&members)).to_vec(),
        }
    }
}

fn code_labels(g: Granularity) -> Vec<String> {
    match g {
        Granularity::Element => ElementCode::ALL.iter().map(|e| e.name().to_string()).collect(),
        Granularity::Type => InteractionType::ALL.iter().map(|t| t.name().to_string()).collect(),
    }
}

fn ingest(cfg: &PipelineConfig, layout: &Layout, io: &mut Io<'_>) -> Result<(), CliError> {
    let turns_bytes = read_input(cfg.input.as_deref(), "--input", "ingest")?;
    let grades_bytes = read_input(cfg.grades.as_deref(), "--grades", "ingest")?;
    let inputs = InputDigests {
        turns_sha256: sha256_hex(&turns_bytes),
        grades_sha256: sha256_hex(&grades_bytes),
    };
    let corpus = ingest_coded_turns(turns_bytes.as_slice(), IngestOptions { lenient: cfg.lenient })?;
    let grades = ingest_grades(grades_bytes.as_slice())?;
    let mut warnings = corpus.warnings;
    warnings.extend(grades.warnings);
    let (corpus, grades) = (corpus.value, grades.value);

    let groups = match cfg.sizes {
        Some(sizes) => stratify_with_sizes(&grades, sizes)?,
        None => stratify_quartiles(&grades)?,
    };
    for s in corpus.student_ids() {
        if grades.get(s).is_none() {
            warnings.push(format!("student `{s}` has chats but no grade and is in no quartile"));
        }
    }
    for s in grades.entries.keys() {
        if corpus.chats_of(s).is_empty() {
            warnings.push(format!("graded student `{s}` has no chats"));
        }
    }
    io.warn(&warnings);

    let mut summary = format!(
        "ingested {} turns in {} chats; {} graded students\ngroup\tstudents\tmean grade\tturns\n",
        corpus.turns().len(),
        corpus.n_chats(),
        grades.len()
    );
    for g in &groups.summary {
        let members = groups.members(g.group);
        let turns = corpus.turns().iter().filter(|t| members.contains(&t.student_id)).count();
        summary.push_str(&format!("{}\t{}\t{:.2}\t{}\n", g.group, g.n_students, g.mean_grade, turns));
    }
    let hash = cfg.hash(&inputs);
    let payload = CorpusPayload {
        inputs,
        corpus,
        grades,
        groups,
        warnings,
    };
    write_artifact(&layout.corpus(), "ingest", &hash, &payload)?;
    io.say(&summary);
    Ok(())
}

fn classify(cfg: &PipelineConfig, layout: &Layout, io: &mut Io<'_>) -> Result<(), CliError> {
    let (payload, hash) = load_corpus(cfg, layout)?;
    let typed = annotate_types(payload.corpus.clone())?;
    let mut group_element_counts = BTreeMap::new();
    let mut group_type_counts = BTreeMap::new();
    for q in Quartile::ALL {
        let members = payload.groups.members(q);
        group_element_counts.insert(q, payload.corpus.element_counts(Some(&members)));
        group_type_counts.insert(q, typed.type_counts(Some(&members)));
    }
    let out = TypedPayload {
        types: typed.types().to_vec(),
        element_counts: payload.corpus.element_counts(None),
        type_counts: typed.type_counts(None),
        group_element_counts,
        group_type_counts,
    };
    write_artifact(&layout.typed(), "classify", &hash, &out)?;
    io.say(&render_frequency_table(&out.element_counts, &out.type_counts));
    Ok(())
}

fn kappa(cfg: &PipelineConfig, layout: &Layout, io: &mut Io<'_>) -> Result<(), CliError> {
    let (payload, hash) = load_corpus(cfg, layout)?;
    let bytes = read_input(cfg.rater_b.as_deref(), "--rater-b", "kappa")?;
    let rater_b = parse_coded_turns(bytes.as_slice())?;
    let result = kappa_per_code(payload.corpus.turns(), &rater_b)?;
    let table = render_kappa_table(&result);
    let out = KappaPayload {
        rater_b_sha256: sha256_hex(&bytes),
        result,
    };
    write_artifact(&layout.kappa(), "kappa", &hash, &out)?;
    io.say(&table);
    Ok(())
}

fn fit(cfg: &PipelineConfig, layout: &Layout, io: &mut Io<'_>) -> Result<(), CliError> {
    let data = Data::load(cfg, layout)?;
    let g = cfg.granularity;
    let mut networks = Vec::new();
    let mut summary = format!("group\tchains\ttokens\ttransitions ({} granularity)\n", g.as_str());
    for q in Quartile::ALL {
        let required = q == cfg.groups.0 || q == cfg.groups.1;
        if !required && !data.has_chats(q) {
            continue;
        }
        let seqs = data.sequences(q)?;
        let net = fit_network_with(&seqs, cfg.pooling)?;
        summary.push_str(&format!(
            "{q}\t{}\t{}\t{}\n",
            net.n_sequences,
            net.n_tokens,
            net.total_transitions()
        ));
        let dot = export_network(&threshold_edges(&net, cfg.edge_threshold()), ExportFormat::Dot);
        write_text(&layout.dir.join(format!("network_{}_{q}.dot", g.as_str())), &dot)?;
        networks.push(net);
    }
    let out = NetworkPayload {
        granularity: g,
        pooling: cfg.pooling,
        edge_threshold: cfg.edge_threshold(),
        networks,
    };
    write_artifact(&layout.per_granularity("network", g, "json"), "fit", &data.hash, &out)?;
    io.say(&summary);
    Ok(())
}

pub(crate) fn network_of<'a>(payload: &'a NetworkPayload, q: Quartile) -> Option<&'a TransitionNetwork> {
    let label = q.to_string();
    payload
        .networks
        .iter()
        .find(|n| n.group_label.as_deref() == Some(label.as_str()))
}

fn compare(cfg: &PipelineConfig, layout: &Layout, io: &mut Io<'_>) -> Result<(), CliError> {
    let seed = cfg.stage_seed("compare")?;
    let data = Data::load(cfg, layout)?;
    let g = cfg.granularity;
    let net_path = layout.per_granularity("network", g, "json");
    let nets: NetworkPayload = read_artifact(&net_path, &data.hash)?;
    let (qa, qb) = cfg.groups;
    let (Some(net_a), Some(net_b)) = (network_of(&nets, qa), network_of(&nets, qb)) else {
        return Err(CliError::BadArtifact {
            path: net_path,
            message: format!("no network for {qa} or {qb}"),
        });
    };
    let a = data.sequences(qa)?;
    let b = data.sequences(qb)?;
    let permutation = PermutationConfig {
        n_perm: cfg.n_perm,
        seed,
        unit: cfg.perm_unit,
        pooling: cfg.pooling,
        alternative: cfg.alternative,
        alpha: cfg.edge_alpha(),
        workers: cfg.workers,
    };
    let edges = compare_edges(&a, &b, &permutation)?;
    let dot = export_comparison(net_a, net_b, &edges, cfg.edge_threshold(), ExportFormat::Dot);
    write_text(&layout.per_granularity("comparison", g, "dot"), &dot)?;
    let table = render_edge_table(&edges, &qa.to_string(), &qb.to_string());
    let out = ComparisonPayload {
        groups: cfg.groups,
        permutation,
        edge_threshold: cfg.edge_threshold(),
        edges,
    };
    write_artifact(&layout.per_granularity("comparison", g, "json"), "compare", &data.hash, &out)?;
    io.say(&table);
    Ok(())
}

fn residuals(cfg: &PipelineConfig, layout: &Layout, io: &mut Io<'_>) -> Result<(), CliError> {
    let seed = cfg.stage_seed("residuals")?;
    let data = Data::load(cfg, layout)?;
    let labels = code_labels(cfg.granularity);
    let (qa, qb) = cfg.groups;
    let pair_table = ContingencyTable::two_groups(
        &qa.to_string(),
        &data.code_counts(qa),
        &qb.to_string(),
        &data.code_counts(qb),
        &labels,
    )?;
    let pair = residual_analysis(&pair_table, cfg.n_perm, seed, cfg.workers)?;

    let counts: Vec<Vec<u64>> = Quartile::ALL.iter().map(|&q| data.code_counts(q)).collect();
    let all_groups = if counts.iter().all(|c| c.iter().any(|&v| v > 0)) {
        let table = ContingencyTable::new(
            Quartile::ALL.iter().map(|q| q.to_string()).collect(),
            labels.clone(),
            counts,
        )?;
        Some(residual_analysis(&table, cfg.n_perm, cfg.stage_seed("residuals-all")?, cfg.workers)?)
    } else {
        None
    };
    let text = render_mosaic(&pair);
    let out = ResidualPayload { pair, all_groups };
    write_artifact(
        &layout.per_granularity("residuals", cfg.granularity, "json"),
        "residuals",
        &data.hash,
        &out,
    )?;
    io.say(&text);
    Ok(())
}

fn patterns(cfg: &PipelineConfig, layout: &Layout, io: &mut Io<'_>) -> Result<(), CliError> {
    let data = Data::load(cfg, layout)?;
    let (qa, qb) = cfg.groups;
    let a = data.sequences(qa)?;
    let b = data.sequences(qb)?;
    let config = PatternConfig {
        min_len: cfg.pattern_len.0,
        max_len: cfg.pattern_len.1,
        top_k: Some(cfg.top_k),
        alpha: cfg.pattern_alpha(),
    };
    let found = mine_patterns(&a, &b, &config)?;
    let table = render_pattern_table(&found, &qa.to_string(), &qb.to_string());
    let out = PatternPayload {
        groups: cfg.groups,
        config,
        patterns: found,
    };
    write_artifact(
        &layout.per_granularity("patterns", cfg.granularity, "json"),
        "patterns",
        &data.hash,
        &out,
    )?;
    io.say(&table);
    Ok(())
}

fn regress(cfg: &PipelineConfig, layout: &Layout, io: &mut Io<'_>) -> Result<(), CliError> {
    let data = Data::load(cfg, layout)?;
    let source = match &data.typed {
        None => FeatureSource::Elements(&data.payload.corpus),
        Some(t) => FeatureSource::Types(t),
    };
    let features = feature_proportions(source, &data.payload.grades, cfg.normalize)?;
    io.warn(&features.warnings);
    let preset: Option<&[&str]> = match (cfg.predictors, cfg.granularity) {
        (PredictorSet::Vif, _) => None,
        (PredictorSet::Preset, Granularity::Element) => Some(&ELEMENT_PRESET),
        (PredictorSet::Preset, Granularity::Type) => Some(&TYPE_PRESET),
    };
    let filtered = vif_filter(&features.value, cfg.vif_threshold, preset)?;
    for d in &filtered.dropped {
        let why = if d.collinear { " (perfectly collinear)" } else { "" };
        let _ = writeln!(io.err, "dropped {} with VIF {:.2}{why}", d.name, d.vif);
    }
    let summary = fit_ols(&filtered.matrix)?;
    let table = render_regression_table(&summary);
    let out = RegressPayload {
        normalization: cfg.normalize,
        predictors: cfg.predictors,
        vif_threshold: cfg.vif_threshold,
        dropped: filtered.dropped,
        summary,
        warnings: features.warnings,
    };
    write_artifact(
        &layout.per_granularity("regress", cfg.granularity, "json"),
        "regress",
        &data.hash,
        &out,
    )?;
    io.say(&table);
    Ok(())
}
