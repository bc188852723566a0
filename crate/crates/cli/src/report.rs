//! Subcommand implementations. Every command emits a CSV table plus a JSON
//! sidecar embedding the resolved config, a grid-spec hash, and the crate
//! versions; identical configs produce byte-identical files and stdout.

use crate::{CliError, RunConfig};
use ckn_core::blockgeom::{easy_constant_bound, BlockDecomposition, EasyBound, ExponentSet};
use ckn_core::field::Field;
use ckn_core::grid::build_shared;
use ckn_core::rearrange::{check_hardy_littlewood, check_polya_szego, iterated_rearrangement};
use ckn_core::solve::{
    assemble_forms, lemma2_constant_sweep, min_eig, refine_study, ConstantEstimate, FormKind,
};
use ckn_core::special::{counterexample_report, supersolution_certificate, CertWindow};
use ckn_core::sturm::AngularProblem;
use ckn_core::util::{fnv1a_hex, log_log_slope};
use serde::Serialize;
use std::fmt::Write as _;
use std::path::Path;

#[derive(Serialize)]
struct Versions {
    #[serde(rename = "ckn-core")]
    core: &'static str,
    #[serde(rename = "ckn-lab")]
    lab: &'static str,
}

#[derive(Serialize)]
struct Sidecar<'a, R: Serialize> {
    command: &'static str,
    config: &'a RunConfig,
    grid_hash: String,
    versions: Versions,
    results: R,
}

fn versions() -> Versions {
    Versions {
        core: ckn_core::VERSION,
        lab: env!("CARGO_PKG_VERSION"),
    }
}

fn grid_hash(cfg: &RunConfig) -> String {
    let canon = format!(
        "gammas={:?};r_min={};r_max={};nodes={};levels={};theta_nodes={}",
        cfg.gammas, cfg.r_min, cfg.r_max, cfg.nodes, cfg.levels, cfg.theta_nodes
    );
    fnv1a_hex(canon.as_bytes())
}

fn emit<R: Serialize>(
    cfg: &RunConfig,
    command: &'static str,
    csv: &str,
    results: R,
) -> Result<(), CliError> {
    std::fs::create_dir_all(&cfg.out)
        .map_err(|e| CliError::Input(format!("cannot create {:?}: {e}", cfg.out)))?;
    let csv_path = cfg.out.join(format!("{command}.csv"));
    std::fs::write(&csv_path, csv)
        .map_err(|e| CliError::Input(format!("cannot write {csv_path:?}: {e}")))?;
    let sidecar = Sidecar {
        command,
        config: cfg,
        grid_hash: grid_hash(cfg),
        versions: versions(),
        results,
    };
    let json = serde_json::to_string_pretty(&sidecar)
        .map_err(|e| CliError::Input(format!("serialization: {e}")))?;
    let json_path = cfg.out.join(format!("{command}.json"));
    std::fs::write(&json_path, json.as_bytes())
        .map_err(|e| CliError::Input(format!("cannot write {json_path:?}: {e}")))?;
    print!("{csv}");
    println!("report: {} + {}", csv_path.display(), json_path.display());
    Ok(())
}

fn decomp_of(cfg: &RunConfig) -> Result<BlockDecomposition, CliError> {
    BlockDecomposition::new(cfg.gammas.clone()).map_err(CliError::from)
}

// ---------------------------------------------------------------- constant

#[derive(Serialize)]
struct ConstantResults {
    analytic_bound: Option<f64>,
    estimates: Vec<ConstantEstimate>,
    observed_order: f64,
    extrapolated: f64,
    beta_sweep: Option<BetaSweepResults>,
}

#[derive(Serialize)]
struct BetaSweepResults {
    betas: Vec<f64>,
    values: Vec<f64>,
    slope: f64,
}

/// Analytic bound (when `q < 2`), numerical estimate, and a convergence
/// table across refinement levels. With a β list, also runs the weighted
/// two-block sweep and reports its fitted slope.
pub fn cmd_constant(cfg: &RunConfig) -> Result<(), CliError> {
    let decomp = decomp_of(cfg)?;
    decomp.require_weighted().map_err(CliError::from)?;
    let analytic = match easy_constant_bound(&decomp, cfg.q).map_err(CliError::from)? {
        EasyBound::Value(v) => Some(v),
        EasyBound::Unavailable => None,
    };
    let base = build_shared(&decomp, cfg.r_min, cfg.r_max, cfg.nodes).map_err(CliError::from)?;
    let study = refine_study(&base, FormKind::hardy(cfg.q), cfg.q, cfg.levels, cfg.tol)
        .map_err(CliError::from)?;

    let mut csv = String::new();
    let _ = writeln!(csv, "level,nodes_per_axis,estimate,residual,iterations,converged");
    for (level, est) in study.estimates.iter().enumerate() {
        let _ = writeln!(
            csv,
            "{level},{},{},{},{},{}",
            est.grid_nodes, est.value, est.residual, est.iterations, est.converged
        );
    }
    if let Some(bound) = analytic {
        let _ = writeln!(csv, "# analytic_bound,{bound}");
    }

    let beta_sweep = if cfg.beta_list.is_empty() {
        None
    } else {
        let sweep =
            lemma2_constant_sweep(&base, cfg.q, &cfg.beta_list).map_err(CliError::from)?;
        let _ = writeln!(csv, "beta,value");
        for (b, est) in sweep.betas.iter().zip(&sweep.estimates) {
            let _ = writeln!(csv, "{b},{}", est.value);
        }
        Some(BetaSweepResults {
            betas: sweep.betas.clone(),
            values: sweep.estimates.iter().map(|e| e.value).collect(),
            slope: sweep.slope,
        })
    };

    if study.estimates.iter().any(|e| !e.converged) {
        return Err(CliError::Numerical(
            "constant estimate did not converge; refine the grid or widen tol".into(),
        ));
    }
    emit(
        cfg,
        "constant",
        &csv,
        ConstantResults {
            analytic_bound: analytic,
            observed_order: study.observed_order,
            extrapolated: study.extrapolated,
            estimates: study.estimates,
            beta_sweep,
        },
    )
}

// ------------------------------------------------------------------ verify

#[derive(Serialize)]
struct VerifyResults {
    functionals: Vec<(String, f64)>,
    ratios: Vec<RatioRow>,
}

#[derive(Serialize)]
struct RatioRow {
    name: String,
    value: f64,
    bound: Option<f64>,
    exceeds: bool,
}

/// Evaluates the functionals and inequality ratios on a stored field,
/// flagging ratios that exceed the known bound plus tolerance.
pub fn cmd_verify(cfg: &RunConfig, field_path: &Path) -> Result<(), CliError> {
    let field = Field::read_from(field_path).map_err(CliError::from)?;
    let decomp = field.grid().decomp().clone();
    decomp.require_weighted().map_err(CliError::from)?;
    let q = cfg.q;

    let hardy = field.hardy_functional(q).map_err(CliError::from)?;
    let grad = field.grad_norm(q).map_err(CliError::from)?;
    let strauss = field.strauss_sup(q).map_err(CliError::from)?;
    let linf = field.linf_ratio().ok();

    let mut functionals = vec![
        ("hardy".to_string(), hardy),
        ("grad_norm".to_string(), grad),
        ("strauss_sup".to_string(), strauss),
    ];
    if let Some(l) = linf {
        functionals.push(("linf_ratio".to_string(), l));
    }

    // p sweep {q, (q+q*)/2, q*} where defined
    let exps = ExponentSet::new(&decomp, q, q).map_err(CliError::from)?;
    let mut p_sweep = vec![q];
    if let Some(qs) = exps.q_star() {
        p_sweep.push((q + qs) / 2.0);
        p_sweep.push(qs);
    }
    for &p in &p_sweep {
        let v = field.ckn_functional(p, q).map_err(CliError::from)?;
        functionals.push((format!("ckn[p={p}]"), v));
    }

    // known bound for the hardy/grad ratio
    let bound = match easy_constant_bound(&decomp, q).map_err(CliError::from)? {
        EasyBound::Value(v) => Some(v),
        EasyBound::Unavailable if q == 2.0 => {
            let forms =
                assemble_forms(field.grid(), FormKind::hardy(2.0)).map_err(CliError::from)?;
            Some(min_eig(&forms, cfg.tol, 200).map_err(CliError::from)?.estimate.value)
        }
        EasyBound::Unavailable => None,
    };
    let tolerance = 0.05;
    let mut ratios = Vec::new();
    if grad > 0.0 {
        let value = hardy / grad;
        let exceeds = bound.map(|b| value > b * (1.0 + tolerance)).unwrap_or(false);
        ratios.push(RatioRow {
            name: "hardy/grad".into(),
            value,
            bound,
            exceeds,
        });
        for &p in &p_sweep {
            let v = field.ckn_functional(p, q).map_err(CliError::from)?;
            ratios.push(RatioRow {
                name: format!("ckn[p={p}]/grad"),
                value: v / grad,
                bound: None,
                exceeds: false,
            });
        }
    }

    let mut csv = String::new();
    let _ = writeln!(csv, "quantity,value");
    for (name, v) in &functionals {
        let _ = writeln!(csv, "{name},{v}");
    }
    let _ = writeln!(csv, "ratio,value,bound,exceeds");
    for row in &ratios {
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            row.name,
            row.value,
            row.bound.map(|b| b.to_string()).unwrap_or_else(|| "n/a".into()),
            row.exceeds
        );
    }
    emit(cfg, "verify", &csv, VerifyResults { functionals, ratios })
}

// --------------------------------------------------------- counterexample

/// Reproduces the concentrating-sequence table over the configured k sweep.
pub fn cmd_counterexample(cfg: &RunConfig) -> Result<(), CliError> {
    let rep = counterexample_report(&cfg.k_list, cfg.r_o, 257, 1024).map_err(CliError::from)?;
    let mut csv = String::new();
    let _ = writeln!(csv, "k,S,R1,R2,R1_chain");
    for row in &rep.rows {
        let _ = writeln!(csv, "{},{},{},{},{}", row.k, row.s, row.r1, row.r2, row.r1_chain);
    }
    emit(cfg, "counterexample", &csv, &rep)
}

// ----------------------------------------------------------- supersolution

#[derive(Serialize)]
struct SupersolutionResults {
    alphas: Vec<f64>,
    certificates: Vec<f64>,
    slope_vs_alpha_minus_one: f64,
}

/// Supersolution certificate per α with the fitted growth slope.
pub fn cmd_supersolution(cfg: &RunConfig) -> Result<(), CliError> {
    let alphas = cfg.alphas_or(&[3.0, 5.0, 9.0, 17.0]);
    let window = CertWindow::default();
    let mut certs = Vec::with_capacity(alphas.len());
    for &a in &alphas {
        certs.push(supersolution_certificate(a, &window).map_err(CliError::from)?);
    }
    let slope = if alphas.len() >= 2 && alphas.iter().all(|&a| a > 1.0) {
        let am1: Vec<f64> = alphas.iter().map(|&a| a - 1.0).collect();
        log_log_slope(&am1, &certs)
    } else {
        f64::NAN
    };
    let mut csv = String::new();
    let _ = writeln!(csv, "alpha,c_star");
    for (a, c) in alphas.iter().zip(&certs) {
        let _ = writeln!(csv, "{a},{c}");
    }
    emit(
        cfg,
        "supersolution",
        &csv,
        SupersolutionResults {
            alphas,
            certificates: certs,
            slope_vs_alpha_minus_one: slope,
        },
    )
}

// -------------------------------------------------------------- rearrange

#[derive(Serialize)]
struct RearrangeResults {
    q: f64,
    polya_szego: (f64, f64),
    hardy_littlewood: (f64, f64),
}

/// Rearrangement checks on a stored field; also writes the rearranged field.
pub fn cmd_rearrange(cfg: &RunConfig, field_path: &Path) -> Result<(), CliError> {
    let field = Field::read_from(field_path).map_err(CliError::from)?;
    let ps = check_polya_szego(&field, cfg.q).map_err(CliError::from)?;
    let hl = check_hardy_littlewood(&field, cfg.q).map_err(CliError::from)?;
    let star = iterated_rearrangement(&field).map_err(CliError::from)?;
    std::fs::create_dir_all(&cfg.out)
        .map_err(|e| CliError::Input(format!("cannot create {:?}: {e}", cfg.out)))?;
    star.write_to(&cfg.out.join("rearranged_field.csv"))
        .map_err(CliError::from)?;

    let mut csv = String::new();
    let _ = writeln!(csv, "check,before,after");
    let _ = writeln!(csv, "polya_szego,{},{}", ps.0, ps.1);
    let _ = writeln!(csv, "hardy_littlewood,{},{}", hl.0, hl.1);
    emit(
        cfg,
        "rearrange",
        &csv,
        RearrangeResults {
            q: cfg.q,
            polya_szego: ps,
            hardy_littlewood: hl,
        },
    )
}

// ---------------------------------------------------------------- angular

#[derive(Serialize)]
struct AngularResults {
    alphas: Vec<f64>,
    lambdas: Vec<f64>,
    slope: f64,
    estimates: Vec<ConstantEstimate>,
}

/// Angular best constant λ(α) over an α sweep with the fitted log-log slope.
pub fn cmd_angular(cfg: &RunConfig) -> Result<(), CliError> {
    if cfg.gammas.len() != 2 {
        return Err(CliError::Input(format!(
            "angular command needs exactly two blocks, got {:?}",
            cfg.gammas
        )));
    }
    let alphas = cfg.alphas_or(&[10.0, 18.0, 32.0, 56.0, 100.0]);
    let mut estimates = Vec::with_capacity(alphas.len());
    for &a in &alphas {
        let prob =
            AngularProblem::new(cfg.gammas[0], cfg.gammas[1], a).map_err(CliError::from)?;
        estimates.push(prob.best_constant(cfg.theta_nodes).map_err(CliError::from)?);
    }
    let lambdas: Vec<f64> = estimates.iter().map(|e| e.value).collect();
    let slope = if alphas.len() >= 2 {
        log_log_slope(&alphas, &lambdas)
    } else {
        f64::NAN
    };
    let mut csv = String::new();
    let _ = writeln!(csv, "alpha,lambda,residual,iterations");
    for (a, est) in alphas.iter().zip(&estimates) {
        let _ = writeln!(csv, "{a},{},{},{}", est.value, est.residual, est.iterations);
    }
    emit(
        cfg,
        "angular",
        &csv,
        AngularResults {
            alphas,
            lambdas,
            slope,
            estimates,
        },
    )
}
