use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use btf::btf_protocol::{new_session, Model, Phase, Session, SessionConfig, TransportKind};
use btf::harness::{format_bytes, report_scaling, report_setup, report_template_expansion, TransmissionLedger, UnitSizes};
use btf::torus_lwe::ParamSet;
use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde_json::{json, Value};

#[derive(Parser, Debug)]
#[command(name = "btf", version, about = "Transciphering protocol runs, byte ledgers and reports")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Parameter set: tfhe80 or tfhe128.
    #[arg(long, global = true, default_value = "tfhe128")]
    params: ParamSet,
    /// Protocol model: btf, st-fhe or orig-tc.
    #[arg(long, global = true, default_value = "btf")]
    model: Model,
    /// Template length in bits.
    #[arg(long, global = true, default_value_t = 64)]
    lw: usize,
    /// Largest accepted Hamming distance; defaults to lw/4.
    #[arg(long, global = true)]
    threshold: Option<u64>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Frame transport: inproc or socket.
    #[arg(long, global = true, default_value = "inproc")]
    transport: TransportKind,
    /// Write the structured report here as JSON.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Key distribution only.
    Keygen,
    /// Key distribution and cipher initialisation.
    Setup,
    /// Setup, then register a random template.
    Register,
    /// Setup, register, then verify a probe; exits 1 on rejection.
    Verify {
        /// Bits of the template flipped in the probe.
        #[arg(long, default_value_t = 0)]
        flips: usize,
    },
    /// Full run with timings.
    Bench {
        #[arg(long, default_value_t = 0)]
        flips: usize,
        #[arg(long, default_value_t = 1)]
        verifications: usize,
    },
    /// Setup-stage traffic of all three models and the reduction ratios.
    Report {
        /// Include cipher initialisation (slow; adds no traffic).
        #[arg(long)]
        full_setup: bool,
    },
    /// Key storage and setup traffic as functions of the client count.
    Scaling {
        #[arg(long, default_value_t = 10)]
        clients: u64,
    },
}

impl Cli {
    fn config(&self) -> SessionConfig {
        let mut c = SessionConfig::new(self.params, self.lw)
            .with_seed(self.seed)
            .with_transport(self.transport);
        if let Some(t) = self.threshold {
            c = c.with_threshold(t);
        }
        c
    }
}

fn template(cli: &Cli) -> Vec<bool> {
    let mut rng = ChaCha20Rng::seed_from_u64(cli.seed);
    rng.set_stream(9);
    (0..cli.lw).map(|_| rng.random()).collect()
}

fn probe(w: &[bool], flips: usize) -> Vec<bool> {
    w.iter().enumerate().map(|(i, &b)| b ^ (i < flips)).collect()
}

fn ledger_table(l: &TransmissionLedger) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{} ledger, {}, l_w = {}", l.model, l.params, l.l_w);
    let _ = writeln!(s, "{:<5} {:>6} {:<8} {:<10} {:>14} {:>12}", "phase", "client", "channel", "artifact", "bytes", "");
    for e in &l.entries {
        let client = if e.client == btf::harness::SHARED { "*".to_string() } else { e.client.to_string() };
        let mut note = String::new();
        if e.secure {
            note.push_str(" secure");
        }
        if e.reissue {
            note.push_str(" reissue");
        }
        let _ = writeln!(
            s,
            "{:<5} {:>6} {:<8} {:<10} {:>14} {:>12}{}",
            e.phase.label(),
            client,
            e.channel.label(),
            e.artifact.label(),
            e.bytes,
            format_bytes(e.bytes),
            note
        );
    }
    for p in Phase::ALL {
        let _ = writeln!(s, "{:<5} total {:>30}", p.label(), format_bytes(l.phase_total(p)));
    }
    s
}

fn timing_table(s: &dyn Session) -> String {
    let mut out = String::new();
    let t = s.timings();
    for p in Phase::ALL {
        for label in t.labels(p) {
            let _ = writeln!(out, "{:<5} {:<22} {:>10.3} s", p.label(), label, t.seconds(&label, &[p]));
        }
    }
    out
}

fn summary(l: &TransmissionLedger) -> Value {
    let channels: serde_json::Map<String, Value> = btf::btf_protocol::Channel::ALL
        .iter()
        .map(|&c| (c.label().to_string(), json!(l.setup_total(c))))
        .collect();
    let phases: serde_json::Map<String, Value> = Phase::ALL
        .iter()
        .map(|&p| (p.label().to_string(), json!(l.phase_total(p))))
        .collect();
    json!({ "setup_by_channel": channels, "by_phase": phases, "total": l.total(), "frame_total": l.frame_total() })
}

fn write_out(cli: &Cli, v: &Value) -> btf::Result<()> {
    if let Some(path) = &cli.out {
        let text = serde_json::to_string_pretty(v).map_err(|e| btf::Error::Decode(e.to_string()))?;
        std::fs::write(path, text + "\n")?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn run_doc(cli: &Cli, s: &dyn Session, results: &[bool]) -> Value {
    let c = s.config();
    json!({
        "model": s.model().name(),
        "params": cli.params.name(),
        "l_w": c.l_w,
        "threshold": c.threshold,
        "seed": c.seed,
        "results": results,
        "ledger": s.ledger(),
        "summary": summary(s.ledger()),
    })
}

fn run(cli: &Cli) -> btf::Result<ExitCode> {
    let mut exit = ExitCode::SUCCESS;
    match &cli.command {
        Command::Keygen | Command::Setup | Command::Register | Command::Verify { .. } | Command::Bench { .. } => {
            let mut s = new_session(cli.model, cli.config())?;
            s.kdp()?;
            let w = template(cli);
            let mut results = Vec::new();
            if !matches!(cli.command, Command::Keygen) {
                s.inp()?;
            }
            if matches!(cli.command, Command::Register | Command::Verify { .. } | Command::Bench { .. }) {
                s.register(0, &w)?;
            }
            let rounds = match cli.command {
                Command::Verify { flips } => Some((flips, 1)),
                Command::Bench { flips, verifications } => Some((flips, verifications)),
                _ => None,
            };
            if let Some((flips, n)) = rounds {
                for _ in 0..n {
                    results.push(s.verify(0, &probe(&w, flips))?.r);
                }
            }
            print!("{}", ledger_table(s.ledger()));
            if matches!(cli.command, Command::Bench { .. } | Command::Setup) {
                print!("{}", timing_table(s.as_ref()));
            }
            for (i, r) in results.iter().enumerate() {
                println!("verification {i}: r = {}", *r as u8);
            }
            if matches!(cli.command, Command::Verify { .. }) && results.first() == Some(&false) {
                exit = ExitCode::from(1);
            }
            write_out(cli, &run_doc(cli, s.as_ref(), &results))?;
        }
        Command::Report { full_setup } => {
            let mut ledgers = Vec::new();
            for model in Model::ALL {
                let mut s = new_session(model, cli.config())?;
                s.kdp()?;
                if *full_setup {
                    s.inp()?;
                }
                ledgers.push(s.ledger().clone());
            }
            let refs: Vec<&TransmissionLedger> = ledgers.iter().collect();
            let setup = report_setup(&refs)?;
            let expansion = report_template_expansion(cli.params, cli.lw);
            print!("{}", setup.table());
            print!("{}", expansion.table());
            write_out(
                cli,
                &json!({ "setup": setup, "template_expansion": expansion, "ledgers": ledgers }),
            )?;
        }
        Command::Scaling { clients } => {
            let mut s = new_session(Model::Btf, cli.config())?;
            s.kdp()?;
            let units = UnitSizes::from_btf_ledger(s.ledger())?;
            let report = report_scaling(&units, *clients)?;
            print!("{}", report.table());
            write_out(cli, &json!(report))?;
        }
    }
    Ok(exit)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
