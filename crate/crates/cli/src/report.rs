//! Tab-separated tables and DOT files assembled from stage artifacts.

use std::path::PathBuf;

use helpseek_core::codes::{annotate_types, render_frequency_table, render_kappa_table};
use helpseek_core::htna::{export_comparison, export_network, threshold_edges, ExportFormat, Granularity};
use helpseek_core::regress::render_regression_table;
use helpseek_core::stats::{render_edge_table, render_mosaic, render_pattern_table};

use crate::artifacts::{
    read_optional, write_text, ComparisonPayload, KappaPayload, Layout, NetworkPayload, PatternPayload,
    RegressPayload, ResidualPayload, TypedPayload,
};
use crate::stages::{load_corpus, network_of};
use crate::{CliError, PipelineConfig};

struct Writer {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Writer {
    fn put(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        write_text(&path, text)?;
        self.written.push(path);
        Ok(())
    }
}

/// Writes every report table whose artifact exists into `out/report`.
///
/// All artifacts present must carry the current configuration hash; a
/// single stale artifact aborts the export before anything is written.
pub fn export(cfg: &PipelineConfig, layout: &Layout) -> Result<Vec<PathBuf>, CliError> {
    let (corpus, hash) = load_corpus(cfg, layout)?;
    let typed: Option<TypedPayload> = read_optional(&layout.typed(), &hash)?;
    let kappa: Option<KappaPayload> = read_optional(&layout.kappa(), &hash)?;

    struct PerGranularity {
        g: Granularity,
        networks: Option<NetworkPayload>,
        comparison: Option<ComparisonPayload>,
        residuals: Option<ResidualPayload>,
        patterns: Option<PatternPayload>,
        regress: Option<RegressPayload>,
    }
    let mut stages = Vec::new();
    for g in [Granularity::Element, Granularity::Type] {
        stages.push(PerGranularity {
            g,
            networks: read_optional(&layout.per_granularity("network", g, "json"), &hash)?,
            comparison: read_optional(&layout.per_granularity("comparison", g, "json"), &hash)?,
            residuals: read_optional(&layout.per_granularity("residuals", g, "json"), &hash)?,
            patterns: read_optional(&layout.per_granularity("patterns", g, "json"), &hash)?,
            regress: read_optional(&layout.per_granularity("regress", g, "json"), &hash)?,
        });
    }

    let mut w = Writer {
        dir: layout.report_dir(),
        written: Vec::new(),
    };
    let frequency = match &typed {
        Some(t) => render_frequency_table(&t.element_counts, &t.type_counts),
        None => {
            let t = annotate_types(corpus.corpus.clone())?;
            render_frequency_table(&corpus.corpus.element_counts(None), &t.type_counts(None))
        }
    };
    w.put("frequency.tsv", &frequency)?;

    let mut groups = String::from("group\tstudents\tmean grade\n");
    for s in &corpus.groups.summary {
        groups.push_str(&format!("{}\t{}\t{:.2}\n", s.group, s.n_students, s.mean_grade));
    }
    w.put("groups.tsv", &groups)?;

    if let Some(k) = &kappa {
        w.put("kappa.tsv", &render_kappa_table(&k.result))?;
    }

    for s in &stages {
        let g = s.g.as_str();
        if let Some(nets) = &s.networks {
            for net in &nets.networks {
                let label = net.group_label.as_deref().unwrap_or("all");
                let dot = export_network(&threshold_edges(net, nets.edge_threshold), ExportFormat::Dot);
                w.put(&format!("network_{g}_{label}.dot"), &dot)?;
            }
        }
        if let Some(c) = &s.comparison {
            let (qa, qb) = c.groups;
            w.put(&format!("edges_{g}.tsv"), &render_edge_table(&c.edges, &qa.to_string(), &qb.to_string()))?;
            if let Some(nets) = &s.networks {
                if let (Some(a), Some(b)) = (network_of(nets, qa), network_of(nets, qb)) {
                    let dot = export_comparison(a, b, &c.edges, c.edge_threshold, ExportFormat::Dot);
                    w.put(&format!("comparison_{g}.dot"), &dot)?;
                }
            }
        }
        if let Some(r) = &s.residuals {
            w.put(&format!("mosaic_{g}.tsv"), &render_mosaic(&r.pair))?;
            if let Some(all) = &r.all_groups {
                w.put(&format!("mosaic_{g}_all.tsv"), &render_mosaic(all))?;
            }
        }
        if let Some(p) = &s.patterns {
            let (qa, qb) = p.groups;
            w.put(
                &format!("patterns_{g}.tsv"),
                &render_pattern_table(&p.patterns, &qa.to_string(), &qb.to_string()),
            )?;
        }
        if let Some(r) = &s.regress {
            w.put(&format!("regression_{g}.tsv"), &render_regression_table(&r.summary))?;
        }
    }
    Ok(w.written)
}
