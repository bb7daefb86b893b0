//! Command-line front end. Every command is a request to a cbr-ikb server:
//! the one named by `--server`, or a private one started for this run.

use std::fmt::Write as _;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cbr_ikb_api::*;
use cbr_ikb_client::{Client, ClientError};

#[derive(Parser)]
#[command(name = "cbr-ikb", version, about = "Case-based question answering over incomplete knowledge bases")]
struct Cli {
    /// Server to talk to. Without it a private server runs for this command
    /// only, so state does not carry over between invocations.
    #[arg(long, env = "CBR_IKB_SERVER", global = true)]
    server: Option<String>,

    /// Print raw JSON responses.
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

/// Inputs to load before the command runs.
#[derive(Args, Default)]
struct Setup {
    /// Triple file to ingest.
    #[arg(long)]
    kb: Option<PathBuf>,
    #[arg(long, default_value_t = '\t')]
    delimiter: char,
    /// Documents file (`doc_id<TAB>text`); needs --mentions.
    #[arg(long, requires = "mentions")]
    documents: Option<PathBuf>,
    /// Mentions file (`doc_id<TAB>entity<TAB>start<TAB>end`).
    #[arg(long, requires = "documents")]
    mentions: Option<PathBuf>,
    /// Proxy texts (`relation<TAB>sentence with <SUBJ> and <OBJ>`).
    #[arg(long)]
    proxies: Option<PathBuf>,
    /// Stored case base to load.
    #[arg(long)]
    casebase: Option<PathBuf>,
    /// `hash[:dim[:seed]]` or `table:PATH` for a CBRE embedding file.
    #[arg(long, default_value = "hash")]
    embedder: String,
    /// Stored KBC model to load.
    #[arg(long)]
    kbc_model: Option<PathBuf>,
}

#[derive(Args)]
struct Reasoning {
    /// Neighbors to retrieve; ties at the k-th similarity are all kept.
    #[arg(short, long, default_value_t = 5)]
    k: usize,
    #[arg(long)]
    no_kbc: bool,
    #[arg(long)]
    no_text: bool,
    #[arg(long, default_value_t = 32)]
    beam_width: usize,
    #[arg(long, default_value_t = 0.5)]
    kbc_threshold: f64,
    #[arg(long, default_value_t = 10)]
    kbc_topm: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scheme {
    Global,
    PerQuestion,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mask {
    PerToken,
    Collapse,
    Off,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP service.
    Serve {
        #[arg(long, default_value = "127.0.0.1:7878")]
        addr: SocketAddr,
    },
    /// Show what the server holds.
    Status,
    /// Load a graph, documents and proxy texts.
    Ingest {
        #[command(flatten)]
        setup: Setup,
    },
    /// Mine inferential chains for every training question.
    Build {
        #[arg(long)]
        train: PathBuf,
        /// Store the case base here.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Mask::PerToken)]
        mask: Mask,
        #[arg(long, default_value_t = 4)]
        max_chain_len: usize,
        /// Mine over symbolic edges only.
        #[arg(long)]
        no_text_mining: bool,
        #[command(flatten)]
        setup: Setup,
    },
    /// Show the cases retrieved for a question.
    Neighbors {
        question: String,
        #[arg(short, long, default_value_t = 5)]
        k: usize,
        /// Embed the question with entity mentions kept.
        #[arg(long)]
        unmasked: bool,
        #[command(flatten)]
        setup: Setup,
    },
    /// Answer one bracketed question.
    Answer {
        question: String,
        /// Answers to print.
        #[arg(long, default_value_t = 10)]
        top: usize,
        #[command(flatten)]
        reasoning: Reasoning,
        #[command(flatten)]
        setup: Setup,
    },
    /// Hits@1 over a question file.
    Evaluate {
        #[arg(long)]
        test: PathBuf,
        /// Write the per-question report here.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        reasoning: Reasoning,
        #[command(flatten)]
        setup: Setup,
    },
    /// Make an incomplete copy of the graph.
    Drop {
        #[arg(long, value_enum)]
        scheme: Scheme,
        /// Drop probability per question, or share of triples for `global`.
        #[arg(long, default_value_t = 0.5)]
        rate: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Questions with gold chains (third column).
        #[arg(long)]
        examples: Option<PathBuf>,
        #[arg(long)]
        out_kb: Option<PathBuf>,
        #[arg(long)]
        out_plan: Option<PathBuf>,
        #[command(flatten)]
        setup: Setup,
    },
    /// Train the ComplEx completion model on the symbolic triples.
    TrainKbc {
        #[arg(long, default_value_t = 64)]
        dim: usize,
        #[arg(long, default_value_t = 100)]
        epochs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Share of triples held out for filtered MRR.
        #[arg(long, default_value_t = 0.0)]
        held_out: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        setup: Setup,
    },
    /// Score chains on dev questions and keep the good ones.
    Revise {
        #[arg(long)]
        dev: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        threshold: f64,
        #[arg(long, default_value_t = 5)]
        cap: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print one line per chain verdict.
        #[arg(long)]
        verdicts: bool,
        #[command(flatten)]
        setup: Setup,
    },
    /// Run an experiment description and its ablations.
    Experiment { config: PathBuf },
    /// Generate the synthetic movie benchmark.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

#[derive(Debug)]
enum Failure {
    Client(ClientError),
    Usage(String),
    Io(String),
}

impl From<ClientError> for Failure {
    fn from(e: ClientError) -> Self {
        Failure::Client(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        let kind = match self {
            Failure::Client(e) => e.kind(),
            Failure::Usage(_) => ErrorKind::Config,
            Failure::Io(_) => ErrorKind::Input,
        };
        match kind {
            ErrorKind::Input => 2,
            ErrorKind::Config => 3,
            ErrorKind::Internal => 4,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Client(e) => write!(f, "{e}"),
            Failure::Usage(m) | Failure::Io(m) => f.write_str(m),
        }
    }
}

/// The server resolves paths against its own working directory.
fn abs(p: &Path) -> PathBuf {
    std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf())
}

fn abs_opt(p: &Option<PathBuf>) -> Option<PathBuf> {
    p.as_deref().map(abs)
}

fn parse_embedder(spec: &str) -> Result<EmbedderChoice, Failure> {
    let bad = || Failure::Usage(format!("embedder {spec:?}: expected hash[:dim[:seed]] or table:PATH"));
    if let Some(path) = spec.strip_prefix("table:") {
        return Ok(EmbedderChoice::Table { path: abs(Path::new(path)) });
    }
    let mut parts = spec.split(':');
    if parts.next() != Some("hash") {
        return Err(bad());
    }
    let dim = parts.next().map(str::parse).transpose().map_err(|_| bad())?.unwrap_or(256);
    let seed = parts.next().map(str::parse).transpose().map_err(|_| bad())?.unwrap_or(0);
    if parts.next().is_some() {
        return Err(bad());
    }
    Ok(EmbedderChoice::Hash { dim, seed })
}

async fn prepare(client: &Client, setup: &Setup) -> Result<Vec<String>, Failure> {
    let mut notes = Vec::new();
    if let Some(kb) = &setup.kb {
        let r = client
            .ingest(&IngestRequest {
                kb: abs(kb),
                delimiter: setup.delimiter,
                documents: abs_opt(&setup.documents),
                mentions: abs_opt(&setup.mentions),
                proxies: abs_opt(&setup.proxies),
            })
            .await?;
        notes.push(format!(
            "graph: {} entities, {} relations, {} triples ({} from {} documents), {} proxy texts",
            r.report.entities, r.report.relations, r.report.triples, r.text_triples, r.documents, r.proxies
        ));
        notes.extend(r.proxy_warnings.iter().map(|w| format!("warning: {w}")));
    }
    if let Some(cb) = &setup.casebase {
        let s = client
            .load_casebase(&LoadCaseBaseRequest {
                path: abs(cb),
                embedder: parse_embedder(&setup.embedder)?,
            })
            .await?;
        notes.push(format!("case base: {} cases, {} chains, dim {}", s.cases, s.chains, s.dim));
    }
    if let Some(m) = &setup.kbc_model {
        let s = client.load_kbc(&LoadKbcRequest { path: abs(m) }).await?;
        notes.push(format!("kbc model: dim {}", s.kbc_dim.unwrap_or(0)));
    }
    Ok(notes)
}

async fn reason_options(client: &Client, r: &Reasoning) -> Result<ReasonOptions, Failure> {
    let status = client.status().await?;
    Ok(ReasonOptions {
        k: r.k,
        beam: Some(BeamConfig {
            beam_width: r.beam_width,
            kbc_threshold: r.kbc_threshold,
            kbc_topm: r.kbc_topm,
            use_kbc: status.kbc_dim.is_some() && !r.no_kbc,
            use_text: status.proxies > 0 && !r.no_text,
            ..BeamConfig::default()
        }),
    })
}

fn json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).unwrap_or_default()
}

/// Runs one command and returns what to print.
async fn run(client: &Client, command: Command, as_json: bool) -> Result<String, Failure> {
    let mut out = String::new();
    match command {
        Command::Serve { .. } => unreachable!("handled in main"),
        Command::Status => {
            let s = client.status().await?;
            if as_json {
                return Ok(json(&s));
            }
            let dim = |d: Option<usize>| d.map_or("-".to_string(), |d| d.to_string());
            let _ = writeln!(
                out,
                "entities {}\trelations {}\ttriples {}\tdocuments {}\tproxies {}\tcases {}\tembedding dim {}\tkbc dim {}",
                s.entities,
                s.relations,
                s.triples,
                s.documents,
                s.proxies,
                s.cases,
                dim(s.embedding_dim),
                dim(s.kbc_dim)
            );
        }
        Command::Ingest { setup } => {
            if setup.kb.is_none() {
                return Err(Failure::Usage("ingest needs --kb".into()));
            }
            for n in prepare(client, &setup).await? {
                let _ = writeln!(out, "{n}");
            }
            if as_json {
                out = json(&client.status().await?);
            }
        }
        Command::Build {
            train,
            out: dest,
            mask,
            max_chain_len,
            no_text_mining,
            setup,
        } => {
            prepare(client, &setup).await?;
            let r = client
                .build(&BuildRequest {
                    train: abs(&train),
                    embedder: parse_embedder(&setup.embedder)?,
                    mask_mode: match mask {
                        Mask::PerToken => MaskMode::PerToken,
                        Mask::Collapse => MaskMode::Collapse,
                        Mask::Off => MaskMode::Off,
                    },
                    max_chain_len,
                    mine_with_text: !no_text_mining,
                    out: abs_opt(&dest),
                })
                .await?;
            if as_json {
                return Ok(json(&r));
            }
            let _ = writeln!(
                out,
                "cases {}\tchainless {}\tskipped {}\tmean chains {:.2}",
                r.cases, r.chainless, r.skipped, r.mean_chains
            );
            for d in &r.diagnostics {
                let _ = writeln!(out, "skipped: {d}");
            }
        }
        Command::Neighbors {
            question,
            k,
            unmasked,
            setup,
        } => {
            prepare(client, &setup).await?;
            let r = client
                .neighbors(&NeighborsRequest {
                    question,
                    k,
                    masked: !unmasked,
                })
                .await?;
            out = if as_json { json(&r) } else { r.render() };
        }
        Command::Answer {
            question,
            top,
            reasoning,
            setup,
        } => {
            prepare(client, &setup).await?;
            let options = reason_options(client, &reasoning).await?;
            let r = client.answer(&AnswerRequest { question, options }).await?;
            if as_json {
                return Ok(json(&r));
            }
            let _ = writeln!(out, "masked: {}", r.explanation.masked_question);
            if !r.explanation.unresolved.is_empty() {
                let _ = writeln!(out, "unresolved: {}", r.explanation.unresolved.join(", "));
            }
            if r.answers.is_empty() {
                let _ = writeln!(out, "no answer");
            }
            for (i, a) in r.answers.iter().take(top).enumerate() {
                let _ = writeln!(out, "{}\t{:.4}\t{}", i + 1, a.score, a.entity);
                for p in a.provenance.iter().take(3) {
                    let _ = writeln!(out, "\t\t{}\t{}\t{:.4}", p.case_id, p.chain, p.path_score);
                }
                if a.provenance.len() > 3 {
                    let _ = writeln!(out, "\t\t... {} more", a.provenance.len() - 3);
                }
            }
        }
        Command::Evaluate {
            test,
            out: dest,
            reasoning,
            setup,
        } => {
            prepare(client, &setup).await?;
            let options = reason_options(client, &reasoning).await?;
            let r = client.evaluate(&EvaluateRequest { test: abs(&test), options }).await?;
            if let Some(dest) = dest {
                std::fs::write(&dest, r.render()).map_err(|e| Failure::Io(format!("{}: {e}", dest.display())))?;
            }
            out = if as_json {
                json(&r)
            } else {
                format!("hits@1 {:.4} ({}/{})\n", r.hits_at_1, r.correct(), r.per_question.len())
            };
        }
        Command::Drop {
            scheme,
            rate,
            seed,
            examples,
            out_kb,
            out_plan,
            setup,
        } => {
            prepare(client, &setup).await?;
            let r = client
                .drop_triples(&DropRequest {
                    scheme: match scheme {
                        Scheme::Global => DropSchemeRequest::Global { fraction: rate },
                        Scheme::PerQuestion => DropSchemeRequest::PerQuestion { p: rate },
                    },
                    seed,
                    examples: abs_opt(&examples),
                    out_kb: abs_opt(&out_kb),
                    out_plan: abs_opt(&out_plan),
                })
                .await?;
            out = if as_json {
                json(&r)
            } else {
                format!(
                    "dropped {}\tremaining {}\taffected {} ({:.4})\tskipped {}\n",
                    r.dropped, r.remaining, r.affected_questions, r.affected_fraction, r.skipped
                )
            };
        }
        Command::TrainKbc {
            dim,
            epochs,
            seed,
            held_out,
            out: dest,
            setup,
        } => {
            prepare(client, &setup).await?;
            let r = client
                .train_kbc(&TrainKbcRequest {
                    config: KbcTrainConfig {
                        dim,
                        epochs,
                        seed,
                        ..KbcTrainConfig::default()
                    },
                    held_out_fraction: held_out,
                    out: abs_opt(&dest),
                })
                .await?;
            if as_json {
                return Ok(json(&r));
            }
            let _ = writeln!(out, "trained on {} triples in {:.1}s", r.triples, r.seconds);
            if let Some(m) = r.metrics {
                let _ = writeln!(
                    out,
                    "held out {}: filtered MRR {:.4}\thits@1 {:.4}\thits@3 {:.4}\thits@10 {:.4}",
                    r.held_out, m.mrr, m.hits_at_1, m.hits_at_3, m.hits_at_10
                );
            }
        }
        Command::Revise {
            dev,
            threshold,
            cap,
            out: dest,
            verdicts,
            setup,
        } => {
            prepare(client, &setup).await?;
            let r = client
                .revise(&ReviseRequest {
                    dev: abs(&dev),
                    config: ReviseConfig {
                        discard_threshold: threshold,
                        max_chains_per_case: cap,
                        ..ReviseConfig::default()
                    },
                    out: abs_opt(&dest),
                })
                .await?;
            if as_json {
                return Ok(json(&r));
            }
            let _ = writeln!(
                out,
                "cases {} -> {}\tchains {} -> {}\tbelow threshold {}\tover cap {}",
                r.cases_in, r.cases_out, r.chains_in, r.chains_kept, r.discarded_below_threshold, r.discarded_over_cap
            );
            if verdicts {
                out.push_str(&r.render());
            }
        }
        Command::Experiment { config } => {
            let r = client.experiment(&ExperimentRequest { config: abs(&config) }).await?;
            if as_json {
                return Ok(json(&r));
            }
            let _ = writeln!(out, "fingerprint {}", r.fingerprint);
            if let Some(first) = r.outcomes.first() {
                let _ = writeln!(out, "affected fraction {:.4}", first.affected_fraction);
            }
            for o in &r.outcomes {
                let _ = writeln!(out, "{}", o.summary_line());
            }
        }
        Command::Synth { out: dir, seed } => {
            let r = client.synth(&SynthRequest { out: abs(&dir), seed }).await?;
            if as_json {
                return Ok(json(&r));
            }
            let _ = writeln!(out, "{} entities, {} triples", r.entities, r.triples);
            for f in &r.files {
                let _ = writeln!(out, "{}", f.display());
            }
        }
    }
    Ok(out)
}

async fn private_server() -> Result<Client, Failure> {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0")
        .await
        .map_err(|e| Failure::Io(format!("cannot start a local server: {e}")))?;
    let addr = listener
        .local_addr()
        .map_err(|e| Failure::Io(format!("cannot start a local server: {e}")))?;
    tokio::spawn(cbr_ikb_server::serve_on(listener));
    Ok(Client::new(format!("http://{addr}")))
}

#[tokio::main]
async fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Command::Serve { addr } = cli.command {
        cbr_ikb_server::init_tracing();
        return match cbr_ikb_server::serve(addr).await {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {addr}: {e}");
                ExitCode::from(2)
            }
        };
    }
    let client = match &cli.server {
        Some(url) => Ok(Client::new(url.clone())),
        None => private_server().await,
    };
    let result = match client {
        Ok(c) => run(&c, cli.command, cli.json).await,
        Err(e) => Err(e),
    };
    match result {
        Ok(text) => {
            print!("{text}");
            if !text.is_empty() && !text.ends_with('\n') {
                println!();
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
