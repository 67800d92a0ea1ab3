//! Command-line front end.
//!
//! Exit codes: 0 success, 1 verification failure, 2 configuration or input
//! error, 3 numerical nonconvergence.

use std::f64::consts::{PI, TAU};
use std::fs;
use std::io::Write;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::dynamics::{iterate, jacobian_determinant, twist_check, BilliardState, MapOptions, DEFAULT_PHI_MIN};
use crate::error::{Error, Result};
use crate::fitting::{fit_expansion, plot_rows, ratio_consistency, ratio_spread, ExpansionFit, RatioStatus};
use crate::geometry::{build_domain, DomainSpec, SupportDomain};
use crate::invariants::{
    compute_invariants, total_curvature, verify_completed_square, verify_ibp_identity, verify_log_curvature_bound,
    InvariantBreakdown, InvariantVector,
};
use crate::orbits::{check_rotation_number, solve_orbit, CacheEntry, OrbitCache, SolveOptions};
use crate::spectrum::{beta_table, caustic_estimates_winding, caustics_from_samples, BetaSample, CausticEstimate, FdScheme};

pub const THREADS_ENV: &str = "BILLIARD_LAB_THREADS";

#[derive(Debug, Parser)]
#[command(name = "billiard-lab", version, about = "Convex billiard tables: orbits, beta function, caustics, invariants")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// Write the primary output here instead of stdout.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    /// Worker threads for orbit sweeps.
    #[arg(long, global = true, env = THREADS_ENV)]
    threads: Option<usize>,
    /// Directory for the on-disk orbit cache, keyed by domain hash.
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DomainArg {
    /// Domain spec JSON file.
    #[arg(long)]
    domain: PathBuf,
    /// Override the quadrature node count.
    #[arg(long)]
    nodes: Option<usize>,
}

#[derive(Debug, Args)]
struct SolverArgs {
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 4)]
    restarts: usize,
    #[arg(long, default_value_t = 512)]
    q_max: u32,
}

impl SolverArgs {
    fn options(&self) -> Result<SolveOptions> {
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::InvalidInput(format!("tolerance {} outside (0, 1)", self.tol)));
        }
        Ok(SolveOptions { tol: self.tol, restarts: self.restarts, q_max: self.q_max, ..SolveOptions::default() })
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate a domain and print its canonical support-function spec.
    Domain(DomainArg),
    /// Iterate the billiard map; CSV k,s,phi,x,y.
    Map {
        #[command(flatten)]
        domain: DomainArg,
        #[arg(long, default_value_t = 0.0)]
        s: f64,
        #[arg(long)]
        phi: f64,
        /// Negative values run the map backward.
        #[arg(long, default_value_t = 100, allow_hyphen_values = true)]
        steps: i64,
        #[arg(long, default_value_t = DEFAULT_PHI_MIN)]
        phi_min: f64,
    },
    /// Maximal-length periodic orbit of rotation number p/q; JSON.
    Orbit {
        #[command(flatten)]
        domain: DomainArg,
        #[arg(long, default_value_t = 1)]
        p: u32,
        #[arg(long)]
        q: u32,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Beta function samples over a q range; CSV p,q,omega,mls,beta.
    Beta {
        #[command(flatten)]
        domain: DomainArg,
        /// Inclusive range `a..b`, or a single value.
        #[arg(long)]
        q: String,
        #[arg(long, default_value_t = 1)]
        p: u32,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Caustic lengths and Lazutkin parameters; CSV q,omega,gamma_length,Q,err_bar.
    Caustics {
        /// Solve orbits on this domain.
        #[arg(long, required_unless_present = "beta_csv")]
        domain: Option<PathBuf>,
        #[arg(long)]
        nodes: Option<usize>,
        /// Reuse samples written by `beta` instead of solving orbits.
        #[arg(long, conflicts_with = "domain")]
        beta_csv: Option<PathBuf>,
        /// Perimeter used to sanity-check caustic lengths read from CSV.
        #[arg(long)]
        perimeter: Option<f64>,
        #[arg(long, required_unless_present = "beta_csv")]
        q: Option<String>,
        #[arg(long, default_value_t = 1)]
        p: u32,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Integral invariants I0..I4 and identity checks; JSON.
    Invariants(DomainArg),
    /// Fit |Γ| − ℓ = Σ c_k Q^{2k/3}; JSON.
    Fit {
        #[arg(long)]
        caustics: PathBuf,
        #[arg(long, required_unless_present = "domain")]
        perimeter: Option<f64>,
        #[arg(long, conflicts_with = "perimeter")]
        domain: Option<PathBuf>,
        #[arg(long = "K", short = 'K', default_value_t = 2)]
        order: usize,
        /// Also write plot data u,y,y_fit to this CSV file.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Ratios c_k / I_k across domains; CSV.
    Ratios {
        /// Fit JSON files, one per domain.
        #[arg(long = "fit", required = true, num_args = 1..)]
        fits: Vec<PathBuf>,
        /// Invariants JSON files, in the same order.
        #[arg(long = "invariants", required = true, num_args = 1..)]
        invariants: Vec<PathBuf>,
        #[arg(long, default_value_t = 1)]
        k: usize,
    },
    /// Run the identity, inequality and map checks; exit 1 on any failure.
    Verify {
        #[command(flatten)]
        domain: DomainArg,
        #[arg(long, default_value_t = 10_000)]
        twist_samples: usize,
        #[arg(long, default_value_t = 16)]
        jacobian_samples: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

enum Outcome {
    Ok,
    VerifyFailed,
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(&cli) {
        Ok(Outcome::Ok) => 0,
        Ok(Outcome::VerifyFailed) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                2
            } else {
                3
            }
        }
    }
}

fn dispatch(cli: &Cli) -> Result<Outcome> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.global.threads {
        if n == 0 {
            return Err(Error::InvalidInput("thread count must be positive".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidInput(format!("cannot build thread pool: {e}")))?;
    pool.install(|| execute(cli))
}

fn execute(cli: &Cli) -> Result<Outcome> {
    let out = Output(cli.global.output.as_deref());
    let cache_dir = cli.global.cache_dir.as_deref();
    match &cli.command {
        Command::Domain(arg) => {
            let domain = load_domain(arg)?;
            let (rho_min, rho_max) = domain.rho_range();
            out.write(&to_json(&domain.to_spec())?)?;
            eprintln!(
                "domain {}: {} modes, perimeter {:.15}, rho in [{rho_min:.6e}, {rho_max:.6e}]",
                &domain.canonical_hash()[..12],
                domain.modes().len(),
                domain.perimeter()
            );
        }
        Command::Map { domain, s, phi, steps, phi_min } => {
            let domain = load_domain(domain)?;
            let opts = MapOptions { phi_min: *phi_min, ..MapOptions::default() };
            if !(*phi >= opts.phi_min && *phi <= PI - opts.phi_min) {
                return Err(Error::TangencyGuard { phi: *phi, min: opts.phi_min });
            }
            let traj = iterate(&domain, &BilliardState::new(&domain, *s, *phi), *steps, &opts)?;
            let sign = if *steps < 0 { -1 } else { 1 };
            let rows = traj.iter().enumerate().map(|(k, st)| {
                let x = domain.position(domain.theta_at_arclength(st.lift_s));
                MapRow { k: sign * k as i64, s: st.lift_s, phi: st.phi, x: x[0], y: x[1] }
            });
            out.write(&to_csv(rows)?)?;
            eprintln!("map: {} bounces", steps.unsigned_abs());
        }
        Command::Orbit { domain, p, q, solver } => {
            let domain = load_domain(domain)?;
            let opts = solver.options()?;
            check_rotation_number(*p, *q, opts.q_max)?;
            let orbit = solve_orbit(&domain, *p, *q, &opts)?;
            if !orbit.converged {
                return Err(Error::NoConvergence { what: "periodic orbit", residual: orbit.residual });
            }
            out.write(&to_json(&orbit)?)?;
            eprintln!("orbit {}/{}: length {:.15}, residual {:.2e}", orbit.p, orbit.q, orbit.length, orbit.residual);
        }
        Command::Beta { domain, q, p, solver } => {
            let domain = load_domain(domain)?;
            let opts = solver.options()?;
            let range = parse_range(q)?;
            let rationals: Vec<(u32, u32)> = range
                .filter(|&q| check_rotation_number(*p, q, opts.q_max).is_ok())
                .map(|q| (*p, q))
                .collect();
            if rationals.is_empty() {
                return Err(Error::InvalidInput(format!("no valid rotation numbers {p}/q for q in {q}")));
            }
            let cache = open_cache(cache_dir, &domain)?;
            let samples = beta_table(&domain, &rationals, &opts, &cache)?;
            save_cache(cache_dir, &domain, &cache)?;
            out.write(&to_csv(samples.iter().copied())?)?;
            eprintln!("beta: {} samples", samples.len());
        }
        Command::Caustics { domain, nodes, beta_csv, perimeter, q, p, solver } => {
            let estimates = if let Some(path) = beta_csv {
                let samples: Vec<BetaSample> = read_csv(path)?;
                let est = caustics_from_samples(&samples, *perimeter)?;
                match q {
                    Some(q) => {
                        let range = parse_range(q)?;
                        est.into_iter().filter(|e| range.contains(&e.q)).collect()
                    }
                    None => est,
                }
            } else {
                let path = domain.as_ref().expect("clap enforces --domain");
                let domain = load_domain(&DomainArg { domain: path.clone(), nodes: *nodes })?;
                let opts = solver.options()?;
                let range = parse_range(q.as_deref().expect("clap enforces --q"))?;
                let cache = open_cache(cache_dir, &domain)?;
                let est = caustic_estimates_winding(&domain, *p, range, &opts, &cache)?;
                save_cache(cache_dir, &domain, &cache)?;
                est
            };
            out.write(&to_csv(estimates.iter().map(CausticRow::from))?)?;
            eprintln!("caustics: {} estimates", estimates.len());
        }
        Command::Invariants(arg) => {
            let domain = load_domain(arg)?;
            let inv = compute_invariants(&domain)?;
            let ibp = verify_ibp_identity(&domain)?;
            let csq = verify_completed_square(&domain)?;
            let log_bound = verify_log_curvature_bound(&domain)?;
            let doc = json!({
                "I0": inv.values[0],
                "I1": inv.values[1],
                "I2": inv.values[2],
                "I3": inv.values[3],
                "I4": inv.values[4],
                "breakdown": inv.breakdown,
                "checks": {
                    "ibp_gap": ibp.gap,
                    "csq_gap": csq.max_gap(),
                    "csq": csq,
                    "lemma41": log_bound,
                },
            });
            out.write(&to_json(&doc)?)?;
            eprintln!("invariants: I1 = {:.15}, ibp gap {:.2e}, csq gap {:.2e}", inv.values[1], ibp.gap, csq.max_gap());
        }
        Command::Fit { caustics, perimeter, domain, order, plot } => {
            let ell = match (perimeter, domain) {
                (Some(ell), _) => *ell,
                (None, Some(path)) => load_domain(&DomainArg { domain: path.clone(), nodes: None })?.perimeter(),
                (None, None) => unreachable!("clap enforces --perimeter or --domain"),
            };
            let rows: Vec<CausticRow> = read_csv(caustics)?;
            let estimates: Vec<CausticEstimate> = rows.into_iter().map(CausticEstimate::from).collect();
            let fit = fit_expansion(&estimates, ell, *order)?;
            if let Some(path) = plot {
                fs::write(path, to_csv(plot_rows(&fit, &estimates, ell).into_iter())?)?;
            }
            out.write(&to_json(&fit)?)?;
            eprintln!("fit: K = {}, c1 = {:.10}, rms {:.2e}, cond {:.2e}", fit.order, fit.coefficients[0], fit.residual_rms, fit.condition_number);
        }
        Command::Ratios { fits, invariants, k } => {
            if fits.len() != invariants.len() {
                return Err(Error::InvalidInput(format!(
                    "{} fit files but {} invariants files",
                    fits.len(),
                    invariants.len()
                )));
            }
            let fit_vals: Vec<ExpansionFit> =
                fits.iter().map(|p| Ok(serde_json::from_str(&fs::read_to_string(p)?)?)).collect::<Result<_>>()?;
            let inv_vals: Vec<InvariantVector> = invariants.iter().map(|p| read_invariants(p)).collect::<Result<_>>()?;
            let entries = ratio_consistency(&fit_vals, &inv_vals, *k)?;
            let rows = entries.iter().enumerate().map(|(i, e)| RatioRow {
                domain: i,
                k: e.k,
                c_k: e.c_k,
                i_k: e.i_k,
                ratio: e.ratio,
                status: match e.status {
                    RatioStatus::Determinate => "determinate",
                    RatioStatus::Indeterminate => "indeterminate",
                },
            });
            out.write(&to_csv(rows)?)?;
            match ratio_spread(&entries) {
                Some(spread) => eprintln!("ratios: k = {k}, spread {spread:.3e}"),
                None => eprintln!("ratios: k = {k}, fewer than two determinate ratios"),
            }
        }
        Command::Verify { domain, twist_samples, jacobian_samples, seed } => {
            let domain = load_domain(domain)?;
            let checks = verify_checks(&domain, *twist_samples, *jacobian_samples, *seed)?;
            let failed = checks.iter().filter(|c| !c.pass).count();
            out.write(&to_json(&json!({ "checks": checks, "failed": failed }))?)?;
            for c in &checks {
                eprintln!("{} {}: {:.3e} (limit {:.1e})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.limit);
            }
            eprintln!("verify: {} of {} checks passed", checks.len() - failed, checks.len());
            if failed > 0 {
                return Ok(Outcome::VerifyFailed);
            }
        }
    }
    Ok(Outcome::Ok)
}

#[derive(Debug, Serialize)]
struct VerifyCheck {
    name: String,
    value: f64,
    limit: f64,
    pass: bool,
}

impl VerifyCheck {
    fn below(name: &str, value: f64, limit: f64) -> Self {
        Self { name: name.to_string(), value, limit, pass: value < limit }
    }
}

fn verify_checks(domain: &SupportDomain, twist_samples: usize, jacobian_samples: usize, seed: u64) -> Result<Vec<VerifyCheck>> {
    let mut checks = Vec::new();
    let gb = total_curvature(domain)?;
    checks.push(VerifyCheck::below("gauss-bonnet", (gb - TAU).abs() / TAU, 1e-9));
    checks.push(VerifyCheck::below("ibp identity", verify_ibp_identity(domain)?.gap, 1e-8));
    let csq = verify_completed_square(domain)?;
    checks.push(VerifyCheck::below("completed square", csq.max_gap(), 1e-7));
    let negative_terms = csq.branches.iter().filter(|b| !b.all_nonnegative).count();
    checks.push(VerifyCheck::below("completed square negative terms", negative_terms as f64, 0.5));
    let chain = verify_log_curvature_bound(domain)?;
    checks.push(VerifyCheck::below("log-curvature chain violations", chain.violations() as f64, 0.5));

    let twist = twist_check(domain, twist_samples, seed, DEFAULT_PHI_MIN);
    checks.push(VerifyCheck {
        name: "twist".into(),
        value: twist.min_value,
        limit: 0.0,
        pass: twist.violations == 0 && twist.samples == twist_samples,
    });

    let opts = MapOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..jacobian_samples {
        let st = BilliardState::new(domain, rng.gen_range(0.0..domain.perimeter()), rng.gen_range(0.2..PI - 0.2));
        let det = jacobian_determinant(domain, &st, 1e-5, &opts)?;
        worst = worst.max((det - 1.0).abs());
    }
    checks.push(VerifyCheck::below("jacobian determinant", worst, 1e-6));
    Ok(checks)
}

struct Output<'a>(Option<&'a Path>);

impl Output<'_> {
    fn write(&self, text: &str) -> Result<()> {
        match self.0 {
            Some(path) => fs::write(path, text)?,
            None => std::io::stdout().lock().write_all(text.as_bytes())?,
        }
        Ok(())
    }
}

fn load_domain(arg: &DomainArg) -> Result<SupportDomain> {
    let mut spec = DomainSpec::from_json(&fs::read_to_string(&arg.domain)?)?;
    if let Some(n) = arg.nodes {
        spec.nodes = n;
    }
    build_domain(&spec)
}

/// `a..b` (inclusive), `a..=b` or a single integer.
fn parse_range(text: &str) -> Result<RangeInclusive<u32>> {
    let bad = || Error::InvalidInput(format!("bad range {text:?}, expected a..b"));
    let num = |s: &str| s.trim().parse::<u32>().map_err(|_| bad());
    let range = match text.split_once("..") {
        Some((a, b)) => num(a)?..=num(b.trim_start_matches('='))?,
        None => {
            let v = num(text)?;
            v..=v
        }
    };
    if range.is_empty() {
        return Err(bad());
    }
    Ok(range)
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn to_csv<T: Serialize>(rows: impl Iterator<Item = T>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

fn read_invariants(path: &Path) -> Result<InvariantVector> {
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(path)?)?;
    let mut values = [0.0; 5];
    for (k, v) in values.iter_mut().enumerate() {
        *v = doc
            .get(format!("I{k}"))
            .and_then(|x| x.as_f64())
            .ok_or_else(|| Error::InvalidInput(format!("{}: missing I{k}", path.display())))?;
    }
    let breakdown = match doc.get("breakdown") {
        Some(b) => serde_json::from_value(b.clone())?,
        None => InvariantBreakdown { i2: vec![], i3: vec![], i4: vec![] },
    };
    Ok(InvariantVector { values, breakdown })
}

fn cache_path(dir: &Path, domain: &SupportDomain) -> PathBuf {
    dir.join(format!("{}.json", domain.canonical_hash()))
}

fn open_cache(dir: Option<&Path>, domain: &SupportDomain) -> Result<OrbitCache> {
    let cache = OrbitCache::new();
    if let Some(dir) = dir {
        let path = cache_path(dir, domain);
        if path.exists() {
            let entries: Vec<CacheEntry> = serde_json::from_str(&fs::read_to_string(path)?)?;
            cache.insert_entries(&domain.canonical_hash(), &entries);
        }
    }
    Ok(cache)
}

fn save_cache(dir: Option<&Path>, domain: &SupportDomain, cache: &OrbitCache) -> Result<()> {
    if let Some(dir) = dir {
        fs::create_dir_all(dir)?;
        let entries = cache.entries(&domain.canonical_hash());
        fs::write(cache_path(dir, domain), to_json(&entries)?)?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct MapRow {
    k: i64,
    s: f64,
    phi: f64,
    x: f64,
    y: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct CausticRow {
    q: u32,
    omega: f64,
    gamma_length: f64,
    #[serde(rename = "Q")]
    lazutkin_q: f64,
    err_bar: f64,
}

impl From<&CausticEstimate> for CausticRow {
    fn from(e: &CausticEstimate) -> Self {
        Self { q: e.q, omega: e.omega_mid, gamma_length: e.gamma_length, lazutkin_q: e.lazutkin_q, err_bar: e.err_bar }
    }
}

impl From<CausticRow> for CausticEstimate {
    fn from(r: CausticRow) -> Self {
        Self {
            q: r.q,
            omega_mid: r.omega,
            gamma_length: r.gamma_length,
            lazutkin_q: r.lazutkin_q,
            err_bar: r.err_bar,
            fd_order: FdScheme::ThreePointMeanAction,
        }
    }
}

#[derive(Debug, Serialize)]
struct RatioRow {
    domain: usize,
    k: usize,
    c_k: Option<f64>,
    i_k: f64,
    ratio: Option<f64>,
    status: &'static str,
}
