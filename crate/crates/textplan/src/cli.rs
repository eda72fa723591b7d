//! Command-line pipeline driver: one subcommand per pipeline stage.
//!
//! Exit codes: 0 on success, 2 on usage errors (malformed flags), 1 on data
//! errors, which are reported as a JSON record on standard error. All
//! randomness flows through `--seed`, so runs are reproducible byte for byte.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use walkdir::WalkDir;

use crate::corpus::{load_corpus, parse_webnlg_xml, save_corpus, DatasetEntry, InputGraph};
use crate::eval::{consistency_table, corpus_bleu, match_report};
use crate::linearizer::{linearize_text_plan, parse_linearized};
use crate::matcher::{
    build_matched_corpus, load_matched, save_matched, split_sentences, MatchConfig,
};
use crate::plan::{enumerate_text_plans, TextPlan};
use crate::realizer::{induce_templates, load_templates, realize_text_plan, save_templates};
use crate::scorer::{
    apply_score_cutoff, fit_with, load_model, save_model, select_plans, ScoringModel, SelectMode,
    DEFAULT_LAMBDA,
};

/// Tunables shared across subcommands, resolved from flags, then the config
/// file, then defaults.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub lambda: f64,
    pub levenshtein_threshold: f64,
    pub max_plans: usize,
    pub seed: u64,
    pub select_mode: String,
    pub top_percent: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            lambda: DEFAULT_LAMBDA,
            levenshtein_threshold: 0.80,
            max_plans: crate::plan::DEFAULT_PLAN_CAP,
            seed: 0,
            select_mode: "best".into(),
            top_percent: 0.10,
        }
    }
}

#[derive(Parser)]
#[command(name = "textplan", version, about = "Symbolic text planning for RDF-to-text generation")]
struct Cli {
    /// Flat key=value config file (lambda, threshold, max_plans, seed,
    /// select, top_percent). Flags always win over the file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SeedArg {
    /// RNG seed for any randomized step.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a directory of WebNLG XML files into a corpus JSON file.
    Ingest {
        #[arg(long = "webnlg-xml")]
        webnlg_xml: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print every text plan for one corpus entry, one linearization per line.
    Enumerate {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        eid: String,
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Recover consistent plans for every (graph, reference) pair.
    Match {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Fit the plan scoring model from a matched corpus.
    Train {
        #[arg(long)]
        matched: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        lambda: Option<f64>,
        /// Count every consistent plan instead of only the rank-0 plan.
        #[arg(long = "all-plans")]
        all_plans: bool,
    },
    /// Rank plans for every corpus entry and write the selected ones.
    Plan {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// best | top-k:K | random-top:P (P in percent).
        #[arg(long)]
        select: Option<String>,
        #[command(flatten)]
        seed: SeedArg,
        /// Drop plans whose total log-score falls below this cutoff.
        #[arg(long = "min-score")]
        min_score: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Convert plans.jsonl to bracketed token lines.
    Linearize {
        #[arg(long)]
        plans: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Parse bracketed token lines back into plan JSON (printed to stdout).
    ParsePlan {
        #[arg(long)]
        text: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
    },
    /// Induce realization templates from a matched corpus.
    InduceTemplates {
        #[arg(long)]
        matched: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Render plans.jsonl as text, one realization per line.
    Realize {
        #[arg(long)]
        plans: PathBuf,
        #[arg(long)]
        templates: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score plan/realization consistency and write a report JSON.
    Eval {
        #[arg(long)]
        plans: PathBuf,
        #[arg(long)]
        texts: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Corpus BLEU of hypothesis lines against aligned reference lines.
    Bleu {
        #[arg(long)]
        hyp: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
    },
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Data(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl CliError {
    fn data(e: impl std::fmt::Display) -> Self {
        CliError::Data(e.to_string())
    }
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn read_lines(path: &Path) -> Result<Vec<String>, CliError> {
    let bytes = read(path)?;
    let text = String::from_utf8(bytes).map_err(CliError::data)?;
    Ok(text.lines().map(str::to_string).collect())
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig, CliError> {
    let mut cfg = PipelineConfig::default();
    let Some(path) = path else { return Ok(cfg) };
    let text = String::from_utf8(read(path)?).map_err(CliError::data)?;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Data(format!(
                "config line {}: expected key=value, got {line:?}",
                lineno + 1
            )));
        };
        let (key, value) = (key.trim(), value.trim());
        let bad = |what: &str| CliError::Data(format!("config key {key}: bad {what} {value:?}"));
        match key {
            "lambda" => cfg.lambda = value.parse().map_err(|_| bad("float"))?,
            "threshold" => {
                cfg.levenshtein_threshold = value.parse().map_err(|_| bad("float"))?
            }
            "max_plans" => cfg.max_plans = value.parse().map_err(|_| bad("integer"))?,
            "seed" => cfg.seed = value.parse().map_err(|_| bad("integer"))?,
            "select" => cfg.select_mode = value.to_string(),
            "top_percent" => cfg.top_percent = value.parse().map_err(|_| bad("float"))?,
            other => {
                return Err(CliError::Data(format!("unknown config key {other:?}")));
            }
        }
    }
    Ok(cfg)
}

fn parse_select(spec: &str, seed: u64, default_percent: f64) -> Result<SelectMode, CliError> {
    if spec == "best" {
        return Ok(SelectMode::Best);
    }
    if let Some(k) = spec.strip_prefix("top-k:") {
        let k: usize = k
            .parse()
            .map_err(|_| CliError::Data(format!("bad top-k count in {spec:?}")))?;
        return Ok(SelectMode::TopK(k));
    }
    if spec == "random-top" {
        return Ok(SelectMode::RandomTopPercent {
            percent: default_percent,
            seed,
        });
    }
    if let Some(p) = spec.strip_prefix("random-top:") {
        let p: f64 = p
            .parse()
            .map_err(|_| CliError::Data(format!("bad percentage in {spec:?}")))?;
        if p <= 0.0 || p > 100.0 {
            return Err(CliError::Data(format!("percentage out of range in {spec:?}")));
        }
        // accept both percentages (10) and fractions (0.10)
        let percent = if p > 1.0 { p / 100.0 } else { p };
        return Ok(SelectMode::RandomTopPercent { percent, seed });
    }
    Err(CliError::Data(format!(
        "bad --select {spec:?}: expected best, top-k:K, or random-top:P"
    )))
}

fn read_plans(path: &Path) -> Result<Vec<TextPlan>, CliError> {
    read_lines(path)?
        .iter()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(CliError::data))
        .collect()
}

fn run_command(cli: Cli) -> Result<(), CliError> {
    let cfg = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Ingest { webnlg_xml, out } => {
            let mut entries: Vec<DatasetEntry> = Vec::new();
            let mut files: Vec<PathBuf> = WalkDir::new(&webnlg_xml)
                .into_iter()
                .filter_map(|e| e.ok())
                .filter(|e| {
                    e.file_type().is_file()
                        && e.path().extension().is_some_and(|x| x == "xml")
                })
                .map(|e| e.into_path())
                .collect();
            files.sort();
            if files.is_empty() {
                return Err(CliError::Data(format!(
                    "no .xml files under {}",
                    webnlg_xml.display()
                )));
            }
            for file in files {
                let handle = fs::File::open(&file).map_err(|source| CliError::Io {
                    path: file.display().to_string(),
                    source,
                })?;
                entries.extend(
                    parse_webnlg_xml(BufReader::new(handle)).map_err(CliError::data)?,
                );
            }
            write(&out, &save_corpus(&entries).map_err(CliError::data)?)?;
            eprintln!("ingested {} entries", entries.len());
        }
        Command::Enumerate { corpus, eid, limit } => {
            let entries = load_corpus(&read(&corpus)?).map_err(CliError::data)?;
            let entry = entries
                .iter()
                .find(|e| e.eid == eid)
                .ok_or_else(|| CliError::Data(format!("no entry with eid {eid:?}")))?;
            let plans = enumerate_text_plans(&entry.graph, limit.or(Some(cfg.max_plans)))
                .map_err(CliError::data)?;
            for plan in &plans {
                println!("{}", linearize_text_plan(plan).map_err(CliError::data)?);
            }
        }
        Command::Match {
            corpus,
            out,
            threshold,
        } => {
            let entries = load_corpus(&read(&corpus)?).map_err(CliError::data)?;
            let match_cfg = MatchConfig {
                threshold: threshold.unwrap_or(cfg.levenshtein_threshold),
            };
            let (examples, report) = build_matched_corpus(&entries, &match_cfg);
            write(&out, &save_matched(&examples).map_err(CliError::data)?)?;
            print!("{}", match_report(&report));
        }
        Command::Train {
            matched,
            out,
            lambda,
            all_plans,
        } => {
            let examples = load_matched(&read(&matched)?).map_err(CliError::data)?;
            let model: ScoringModel<f64> =
                fit_with(&examples, lambda.unwrap_or(cfg.lambda), all_plans)
                    .map_err(CliError::data)?;
            write(&out, &save_model(&model).map_err(CliError::data)?)?;
        }
        Command::Plan {
            corpus,
            model,
            select,
            seed,
            min_score,
            out,
        } => {
            let entries = load_corpus(&read(&corpus)?).map_err(CliError::data)?;
            let model: ScoringModel<f64> = load_model(&read(&model)?).map_err(CliError::data)?;
            let mode = parse_select(
                select.as_deref().unwrap_or(&cfg.select_mode),
                seed.seed.unwrap_or(cfg.seed),
                cfg.top_percent,
            )?;
            let mut lines = String::new();
            for entry in &entries {
                let mut ranked = model.rank_plans(&entry.graph).map_err(CliError::data)?;
                if let Some(cutoff) = min_score {
                    ranked = apply_score_cutoff(ranked, cutoff);
                }
                for plan in select_plans(&ranked, mode).map_err(CliError::data)? {
                    lines.push_str(&serde_json::to_string(&plan).map_err(CliError::data)?);
                    lines.push('\n');
                }
            }
            write(&out, lines.as_bytes())?;
        }
        Command::Linearize { plans, out } => {
            let mut lines = String::new();
            for plan in read_plans(&plans)? {
                lines.push_str(&linearize_text_plan(&plan).map_err(CliError::data)?);
                lines.push('\n');
            }
            write(&out, lines.as_bytes())?;
        }
        Command::ParsePlan { text, corpus } => {
            let entries = load_corpus(&read(&corpus)?).map_err(CliError::data)?;
            let graphs: Vec<&InputGraph> = entries.iter().map(|e| &e.graph).collect();
            for line in read_lines(&text)? {
                if line.trim().is_empty() {
                    continue;
                }
                // a linearization carries no entry id; accept the first
                // corpus graph it fully matches
                let plan = graphs
                    .iter()
                    .find_map(|g| parse_linearized(&line, g).ok())
                    .ok_or_else(|| {
                        CliError::Data(format!("no corpus graph matches plan {line:?}"))
                    })?;
                println!("{}", serde_json::to_string(&plan).map_err(CliError::data)?);
            }
        }
        Command::InduceTemplates {
            matched,
            out,
            threshold,
        } => {
            let examples = load_matched(&read(&matched)?).map_err(CliError::data)?;
            let match_cfg = MatchConfig {
                threshold: threshold.unwrap_or(cfg.levenshtein_threshold),
            };
            let bank = induce_templates(&examples, &match_cfg);
            write(&out, &save_templates(&bank).map_err(CliError::data)?)?;
            eprintln!(
                "induced {} templates from {} candidate sentences",
                bank.len(),
                bank.induction_stats.0
            );
        }
        Command::Realize {
            plans,
            templates,
            out,
        } => {
            let bank = match templates {
                Some(path) => load_templates(&read(&path)?).map_err(CliError::data)?,
                None => Default::default(),
            };
            let mut lines = String::new();
            for plan in read_plans(&plans)? {
                lines.push_str(&realize_text_plan(&plan, &bank));
                lines.push('\n');
            }
            write(&out, lines.as_bytes())?;
        }
        Command::Eval {
            plans,
            texts,
            out,
            threshold,
        } => {
            let plans = read_plans(&plans)?;
            let texts = read_lines(&texts)?;
            if plans.len() != texts.len() {
                return Err(CliError::Data(format!(
                    "{} plans but {} texts",
                    plans.len(),
                    texts.len()
                )));
            }
            let match_cfg = MatchConfig {
                threshold: threshold.unwrap_or(cfg.levenshtein_threshold),
            };
            let mut pairs = Vec::new();
            for (plan, text) in plans.iter().zip(&texts) {
                let sentences = split_sentences(text).sentences;
                for (i, sp) in plan.sentences.iter().enumerate() {
                    let sentence = sentences.get(i).cloned().unwrap_or_default();
                    pairs.push((sp.clone(), sentence));
                }
            }
            let table = consistency_table(&pairs, &match_cfg).map_err(CliError::data)?;
            write(&out, &serde_json::to_vec_pretty(&table).map_err(CliError::data)?)?;
            println!(
                "entity_rate={:.3} order_rate={:.3} n={}",
                table.entity_rate, table.order_rate, table.n
            );
        }
        Command::Bleu { hyp, reference } => {
            let hyps = read_lines(&hyp)?;
            let refs: Vec<Vec<String>> = read_lines(&reference)?
                .into_iter()
                .map(|r| vec![r])
                .collect();
            let score: f64 = corpus_bleu(&hyps, &refs).map_err(CliError::data)?;
            println!("BLEU: {score:.2}");
        }
    }
    Ok(())
}

/// Entry point for the `textplan` binary.
pub fn run() -> ExitCode {
    let cli = Cli::parse();
    match run_command(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let record = serde_json::json!({ "error": err.to_string() });
            eprintln!("{record}");
            ExitCode::FAILURE
        }
    }
}
