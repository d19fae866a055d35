//! `singwave`: command-line experiments on the propagator library.

mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use singwave::acceptance;
use singwave::assembly::{delta_model_transfer, full_propagator, reflection_matrix};
use singwave::coefficients::{lemma_bound_report, lemma_grid, LemmaQuantity};
use singwave::config::Scenario;
use singwave::convergence::{beta_study, coeff_study, limit_sandwich_study, transfer_study};
use singwave::hyperbolic::e_hyp;
use singwave::oracle::direct_propagator;
use singwave::singular::e_sing;
use singwave::wavepacket::{build_packet, evolve_packet, measure_reflection, predicted_ratios, Method, PacketSpec};
use singwave::zones::{boundary_polyline, choose_zone_constant};
use singwave::{Evaluator, IntegratorConfig, ZoneConstant};

use output::{artifact, emit, fmt, matrix_json, stdout, write};

/// Exit code for a missed validation target.
const EXIT_VALIDATION: u8 = 2;
const EXIT_USAGE: u8 = 1;

#[derive(Parser)]
#[command(name = "singwave", version, about = "Propagators across a jump in the dissipation coefficient")]
struct Cli {
    /// Preset (default, no-jump, quadratic, sloped) or a TOML scenario file.
    #[arg(long, global = true, default_value = "default")]
    scenario: String,
    /// Integrator tolerance.
    #[arg(long, global = true, default_value_t = 1e-10)]
    tol: f64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Coefficient bound ratios against (Φ_ε + 1)^k.
    CoeffCheck {
        #[arg(long, default_value_t = 3)]
        k_max: usize,
        #[arg(long, value_delimiter = ',', default_value = "0.125,0.0625,0.03125,0.015625,0.0078125,0.00390625,0.001953125")]
        eps: Vec<f64>,
        /// Writes `<out>_coeff.csv`, `<out>_diss.csv`, `<out>_approx.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Zone geometry.
    Zones {
        #[command(subcommand)]
        action: ZonesCmd,
    },
    /// Single propagator query, printed as JSON.
    Propagator {
        #[command(subcommand)]
        kind: PropagatorCmd,
    },
    /// Convergence study in ε with a fitted log-log slope.
    Converge(ConvergeArgs),
    /// Wave-packet reflection experiment.
    Wavepacket {
        #[command(subcommand)]
        action: WavepacketCmd,
    },
    /// Transfer matrix of the delta-coefficient model.
    DeltaModel {
        #[arg(long, default_value_t = 1e-3)]
        eps: f64,
        #[arg(long, default_value_t = 1.0)]
        xi: f64,
    },
    /// Runs the acceptance criteria.
    Acceptance {
        #[arg(long)]
        criterion: Option<u8>,
    },
}

#[derive(Subcommand)]
enum ZonesCmd {
    /// CSV `t,xi` of the singular-zone boundary.
    Dump {
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 65)]
        samples: usize,
        /// Overrides the certified zone constant.
        #[arg(long)]
        n: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct TimeQuery {
    #[arg(long)]
    t1: f64,
    #[arg(long)]
    t2: f64,
    #[arg(long)]
    xi: f64,
    #[arg(long)]
    eps: f64,
    #[arg(long)]
    n: Option<f64>,
}

#[derive(Subcommand)]
enum PropagatorCmd {
    Hyp(TimeQuery),
    Full(TimeQuery),
    Direct(TimeQuery),
    Sing {
        #[arg(long, allow_hyphen_values = true)]
        tau1: f64,
        #[arg(long, allow_hyphen_values = true)]
        tau2: f64,
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        eps: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum QuantityArg {
    LimitSandwich,
    Transfer,
    Beta,
    Coeff,
}

#[derive(Args)]
struct ConvergeArgs {
    #[arg(long, value_enum)]
    quantity: QuantityArg,
    #[arg(long, alias = "eps-list", value_delimiter = ',', required = true)]
    eps: Vec<f64>,
    /// Frequency of the limit-sandwich study.
    #[arg(long, default_value_t = 16.0)]
    xi: f64,
    #[arg(long, default_value_t = 0.5)]
    t1: f64,
    #[arg(long, default_value_t = 1.5)]
    t2: f64,
    /// Transfer study runs along Λ = factor·ε.
    #[arg(long, default_value_t = 1.0)]
    lambda_factor: f64,
    /// Slope below which the exit code is 2; 0.8 for the limit sandwich, 0.9 otherwise.
    #[arg(long)]
    min_slope: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Direct,
    Assembled,
    Limit,
}

#[derive(Subcommand)]
enum WavepacketCmd {
    Run {
        #[arg(long, default_value_t = 0.01)]
        eps: f64,
        #[arg(long, default_value_t = 0.0625)]
        delta: f64,
        #[arg(long, value_enum, default_value = "direct")]
        method: MethodArg,
        #[arg(long, default_value_t = 1.75)]
        t2: f64,
        /// Extra snapshot times.
        #[arg(long, value_delimiter = ',')]
        times: Vec<f64>,
        #[arg(long, default_value_t = 4096)]
        grid: usize,
        /// Writes `<out>_report.json`, `<out>_spectra.csv`, `<out>_field_<t>.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(n) = std::env::var("SINGWAVE_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            log::warn!("cannot cap threads: {e}");
        }
    }
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_VALIDATION),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

struct Ctx {
    ev: Evaluator,
    cfg: IntegratorConfig,
}

impl Ctx {
    fn zc(&self, n: Option<f64>) -> ZoneConstant {
        match n {
            Some(n) => ZoneConstant::fixed(n, self.ev.moll.k_prime),
            None => choose_zone_constant(&self.ev),
        }
    }
}

/// `Ok(false)` signals a missed validation target.
fn run(cli: Cli) -> Result<bool> {
    let scenario = Scenario::load(&cli.scenario)?;
    let cfg = IntegratorConfig::with_tol(cli.tol);
    cfg.validate()?;
    let ctx = Ctx { ev: scenario.evaluator()?, cfg };
    match cli.command {
        Command::CoeffCheck { k_max, eps, out } => coeff_check(&ctx, k_max, &eps, out),
        Command::Zones { action: ZonesCmd::Dump { eps, samples, n, out } } => {
            let zc = ctx.zc(n);
            let mut csv = String::from("t,xi\n");
            for (t, xi) in boundary_polyline(eps, &zc, samples) {
                csv.push_str(&format!("{},{}\n", fmt(t), fmt(xi)));
            }
            emit(out.as_deref(), &csv)?;
            eprintln!("zones: N = {} (c1 = {}, c2 = {}), eps = {}", fmt(zc.n), fmt(zc.c1), fmt(zc.c2), fmt(eps));
            Ok(true)
        }
        Command::Propagator { kind } => propagator(&ctx, kind),
        Command::Converge(args) => converge(&ctx, args),
        Command::Wavepacket { action: WavepacketCmd::Run { eps, delta, method, t2, times, grid, out } } => {
            wavepacket(&ctx, &scenario, eps, delta, method, t2, &times, grid, out)
        }
        Command::DeltaModel { eps, xi } => {
            let m = delta_model_transfer(&ctx.ev.moll, eps, xi, &ctx.cfg)?;
            let target = reflection_matrix((-1.0f64).exp())?;
            let err = (m - target).norm();
            let doc = json!({ "matrix": matrix_json(&m), "target": matrix_json(&target), "error": err, "eps": eps, "xi": xi });
            stdout(&format!("{}\n", serde_json::to_string_pretty(&doc)?))?;
            eprintln!("delta-model: ‖T - target‖ = {}", fmt(err));
            Ok(err <= 1e-2)
        }
        Command::Acceptance { criterion } => {
            let ids: Vec<u8> = match criterion {
                Some(c) if acceptance::CRITERIA.contains(&c) => vec![c],
                Some(c) => bail!("no acceptance criterion {c}; valid are 1..=9"),
                None => acceptance::CRITERIA.to_vec(),
            };
            let mut ok = true;
            for id in ids {
                let o = acceptance::run(id);
                stdout(&format!("{}\n", o.line()))?;
                ok &= o.passed;
            }
            Ok(ok)
        }
    }
}

fn coeff_check(ctx: &Ctx, k_max: usize, eps: &[f64], out: Option<PathBuf>) -> Result<bool> {
    let rep = lemma_bound_report(&ctx.ev, k_max, eps, &lemma_grid(&ctx.ev, eps))?;
    let mut worst = 0.0f64;
    for k in 0..=k_max {
        for q in [LemmaQuantity::Coeff, LemmaQuantity::Diss] {
            worst = worst.max(rep.growth(k, q));
        }
    }
    match out {
        Some(prefix) => {
            for (q, name) in [(LemmaQuantity::Coeff, "coeff"), (LemmaQuantity::Diss, "diss"), (LemmaQuantity::Approx, "approx")] {
                write(&artifact(&prefix, &format!("{name}.csv"))?, &rep.to_csv(q))?;
            }
        }
        None => stdout(&rep.to_csv(LemmaQuantity::Diss))?,
    }
    eprintln!("coeff-check: max growth across eps = {} (limit 2)", fmt(worst));
    Ok(worst <= 2.0)
}

fn propagator(ctx: &Ctx, kind: PropagatorCmd) -> Result<bool> {
    let doc = match kind {
        PropagatorCmd::Hyp(q) => {
            let p = e_hyp(&ctx.ev, q.t2, q.t1, q.xi, q.eps, &ctx.cfg)?;
            json!({ "matrix": matrix_json(&p.matrix), "stats": p })
        }
        PropagatorCmd::Full(q) => {
            let p = full_propagator(&ctx.ev, q.t1, q.t2, q.xi, q.eps, &ctx.zc(q.n), &ctx.cfg)?;
            json!({ "matrix": matrix_json(&p.matrix), "path": p.path, "stats": { "steps": p.steps, "n": ctx.zc(q.n).n } })
        }
        PropagatorCmd::Direct(q) => {
            let (m, s) = direct_propagator(&ctx.ev, q.t1, q.t2, q.xi, q.eps, &ctx.cfg)?;
            json!({ "matrix": matrix_json(&m), "stats": { "steps": s.steps, "rejected": s.rejected, "est_error": s.est_error } })
        }
        PropagatorCmd::Sing { tau1, tau2, lambda, eps } => {
            let p = e_sing(&ctx.ev, tau2, tau1, lambda, eps, ctx.cfg.rel_tol.max(1e-13))?;
            json!({ "matrix": matrix_json(&p.matrix), "stats": p })
        }
    };
    stdout(&format!("{}\n", serde_json::to_string_pretty(&doc)?))?;
    Ok(true)
}

fn converge(ctx: &Ctx, a: ConvergeArgs) -> Result<bool> {
    let zc = ctx.zc(None);
    let (study, min) = match a.quantity {
        QuantityArg::LimitSandwich => (limit_sandwich_study(&ctx.ev, &zc, (a.t1, a.t2), a.xi, &a.eps, &ctx.cfg)?, 0.8),
        QuantityArg::Transfer => (transfer_study(&ctx.ev, &zc, a.lambda_factor, &a.eps, ctx.cfg.rel_tol.max(1e-13))?, 0.9),
        QuantityArg::Beta => (beta_study(&ctx.ev, &a.eps)?, 0.9),
        QuantityArg::Coeff => (coeff_study(&ctx.ev, &a.eps)?, 0.9),
    };
    emit(a.out.as_deref(), &study.to_csv())?;
    let min = a.min_slope.unwrap_or(min);
    eprintln!("converge: slope {} (r² {}), required {}", fmt(study.fit.slope), fmt(study.fit.r_squared), min);
    Ok(study.fit.slope >= min)
}

#[allow(clippy::too_many_arguments)]
fn wavepacket(
    ctx: &Ctx,
    scenario: &Scenario,
    eps: f64,
    delta: f64,
    method: MethodArg,
    t2: f64,
    times: &[f64],
    grid: usize,
    out: Option<PathBuf>,
) -> Result<bool> {
    let method = match method {
        MethodArg::Direct => Method::Direct,
        MethodArg::Assembled => Method::Assembled,
        MethodArg::Limit => Method::Limit,
    };
    let spec = PacketSpec { grid_size: grid, ..PacketSpec::with_delta(delta) };
    let packet = build_packet(&spec)?;
    let initial = evolve_packet(&packet, &ctx.ev, 0.0, eps, method, &ctx.cfg)?;
    let last = evolve_packet(&packet, &ctx.ev, t2, eps, method, &ctx.cfg)?;
    let report = measure_reflection(&initial, &last, &spec)?;

    let h = ctx.ev.coeff.big_h;
    let (pt, pr) = predicted_ratios(h);
    let checked = ctx.ev.coeff.is_piecewise_constant();
    let ok = !checked
        || ((report.transmitted_ratio / pt - 1.0).abs() <= 0.05
            && if pr > 0.0 { (report.reflected_ratio / pr - 1.0).abs() <= 0.05 } else { report.reflected_ratio <= 0.01 });
    let doc = json!({
        "scenario": scenario.name,
        "eps": eps,
        "delta": delta,
        "method": method,
        "big_h": h,
        "predicted": { "transmitted_ratio": pt, "reflected_ratio": pr },
        "report": report,
    });
    let text = serde_json::to_string_pretty(&doc)?;
    match &out {
        Some(prefix) => {
            write(&artifact(prefix, "report.json")?, &text)?;
            let mut csv = String::from("xi,abs_u0_hat,abs_u_hat\n");
            for &k in &packet.active {
                csv.push_str(&format!("{},{},{}\n", fmt(packet.xi[k]), fmt(packet.u0_hat[k].norm()), fmt(last.u_hat[k].norm())));
            }
            write(&artifact(prefix, "spectra.csv")?, &csv)?;
            let mut snaps = vec![initial, last];
            for &t in times {
                snaps.push(evolve_packet(&packet, &ctx.ev, t, eps, method, &ctx.cfg)?);
            }
            for f in &snaps {
                let mut csv = String::from("x,re_u,im_u,abs_u\n");
                for (x, u) in f.x.iter().zip(&f.u) {
                    csv.push_str(&format!("{},{},{},{}\n", fmt(*x), fmt(u.re), fmt(u.im), fmt(u.norm())));
                }
                let path = artifact(prefix, &format!("field_{:.4}.csv", f.t))
                    .with_context(|| format!("snapshot at t = {}", f.t))?;
                write(&path, &csv)?;
            }
        }
        None => stdout(&format!("{text}\n"))?,
    }
    eprintln!(
        "wavepacket: transmitted/incident {}, reflected/incident {} (predicted {}, {})",
        fmt(report.transmitted_ratio),
        fmt(report.reflected_ratio),
        fmt(pt),
        fmt(pr)
    );
    Ok(ok)
}
