//! `qecw`: command-line front end for the error-correction workbench.
//!
//! CSV goes out with a header row and `{:.16e}` floats; JSON reports carry
//! a `provenance` block with the tool version, seed and resolved flags.
//! Exit status is 0 on success, 2 for bad flags and 3 when a numerical
//! guard (truncation leakage, channel tolerance) trips.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use qecw_core::bosonic::{damped_kraus, kitten_code, kitten_round, photon_loss_ratio, DampingParams, FockSpace};
use qecw_core::classical::{
    kappa_eff_ratio, repetition_logical_error, single_bit_reliability, tmr_memory_optimize, tmr_reliability,
    NoiseParams, TmrKind,
};
use qecw_core::gkp::{finite_energy_stabilizer_check, GkpCode, GkpParams, GkpStabilizer, PhaseVector};
use qecw_core::qubit_codes::{
    amplitude_damping_register, bitflip_errors, kl_check_scaling, leung4_code, leung4_errors, repetition3_code,
    CodeSpace,
};
use qecw_core::toric::{build_lattice, stabilizer_structure, toric_monte_carlo};
use qecw_core::wigner::wigner_grid;
use qecw_core::{apply_channel, DensityMatrix, Error, Operator, StateVector, C64};
use serde_json::{json, Value};

#[derive(Parser, Debug)]
#[command(name = "qecw", version, about = "Classical and quantum error-correction workbench")]
struct Cli {
    /// Seed for Monte Carlo runs. Falls back to QECW_SEED, then 0.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Write the result here instead of standard output.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Logical error of the (2m+1)-bit repetition code against eps.
    Repetition {
        #[arg(long, default_value_t = 1)]
        m: u32,
        #[arg(long, default_value_t = 0.0)]
        eps_min: f64,
        #[arg(long, default_value_t = 1.0)]
        eps_max: f64,
        #[arg(long, default_value_t = 101)]
        points: usize,
    },
    /// Reliability of the triple-redundant memory against kappa t0.
    Ftmem {
        /// Majority-voter reliability R_M.
        #[arg(long, default_value_t = 0.925)]
        rm: f64,
        #[arg(long, default_value_t = 1.0)]
        kt_max: f64,
        #[arg(long, default_value_t = 101)]
        points: usize,
    },
    /// Effective flip rate of the corrected memory against the per-cycle error.
    FtmemOpt {
        #[arg(long, default_value_t = 0.01)]
        eps_m: f64,
        /// Grid size (odd, so eps_M itself is a grid point).
        #[arg(long, default_value_t = 201)]
        points: usize,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Knill-Laflamme report for a code and an error channel.
    KlCheck {
        #[arg(long, value_enum)]
        code: CodeName,
        #[arg(long, value_enum)]
        channel: ChannelName,
        /// Error strength: flip or decay probability, or kappa t for photon loss.
        #[arg(long)]
        param: f64,
    },
    /// Repeated kitten-code correction rounds under photon loss.
    Kitten {
        #[arg(long, default_value_t = 0.02)]
        kappa_t: f64,
        #[arg(long, default_value_t = 5)]
        cycles: usize,
    },
    /// Finite-energy GKP codewords, stabilizer values and a shift round trip.
    Gkp {
        #[arg(long, default_value_t = 0.025)]
        lambda: f64,
        #[arg(long, default_value_t = 4.0)]
        squeeze: f64,
        #[arg(long, default_value_t = 6)]
        comb: usize,
        /// Fock dimension of the codewords.
        #[arg(long, default_value_t = 350)]
        dim: usize,
        /// Dimension for displacements (default: dim + 150).
        #[arg(long)]
        work_dim: Option<usize>,
        #[arg(long, default_value_t = 0.15)]
        shift_x: f64,
        #[arg(long, default_value_t = -0.1, allow_negative_numbers = true)]
        shift_p: f64,
    },
    /// Toric-code Monte Carlo with greedy matching.
    Toric {
        #[arg(long = "L", default_value_t = 4)]
        l: usize,
        #[arg(long, default_value_t = 0.05)]
        p: f64,
        #[arg(long, default_value_t = 1000)]
        trials: u64,
    },
    /// Wigner function on a square grid, as x,p,w CSV.
    Wigner {
        /// fock:N, vacuum, coherent:RE,IM, cat:ALPHA[,odd] or file:PATH (JSON).
        #[arg(long)]
        state: String,
        /// Points per axis.
        #[arg(long, default_value_t = 41)]
        grid: usize,
        /// Half-width of the square window in x and p.
        #[arg(long, default_value_t = 3.0)]
        extent: f64,
        /// Fock dimension for the built-in states.
        #[arg(long, default_value_t = 40)]
        dim: usize,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum CodeName {
    Repetition3,
    Leung4,
    Kitten,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ChannelName {
    Bitflip,
    AmplitudeDamping,
    PhotonLoss,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Guard(String),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Leakage(_) | Error::NotTracePreserving { .. } | Error::KnillLaflamme(_) => Failure::Guard(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

type Outcome = Result<String, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn resolve_seed(flag: Option<u64>) -> Result<u64, Failure> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var("QECW_SEED") {
        Ok(v) => v.trim().parse().map_err(|_| usage(format!("QECW_SEED={v:?} is not a 64-bit unsigned integer"))),
        Err(_) => Ok(0),
    }
}

fn provenance(command: &str, seed: u64, params: Value) -> Value {
    json!({
        "tool": "qecw",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "seed": seed,
        "parameters": params,
    })
}

fn report(mut body: Value, prov: Value) -> String {
    body["provenance"] = prov;
    let mut s = serde_json::to_string_pretty(&body).expect("report serializes");
    s.push('\n');
    s
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 }).collect()
}

fn check_prob(name: &str, v: f64) -> Result<(), Failure> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(usage(format!("--{name} must lie in [0, 1] (got {v})")))
    }
}

fn cmd_repetition(m: u32, eps_min: f64, eps_max: f64, points: usize) -> Outcome {
    check_prob("eps-min", eps_min)?;
    check_prob("eps-max", eps_max)?;
    if eps_min > eps_max || points < 2 {
        return Err(usage("need eps-min <= eps-max and at least 2 points"));
    }
    let mut s = String::from("eps,eps_logical\n");
    for e in linspace(eps_min, eps_max, points) {
        let _ = writeln!(s, "{e:.16e},{:.16e}", repetition_logical_error(m, e));
    }
    Ok(s)
}

fn cmd_ftmem(rm: f64, kt_max: f64, points: usize) -> Outcome {
    check_prob("rm", rm)?;
    if !(kt_max >= 0.0 && kt_max.is_finite()) || points < 2 {
        return Err(usage("need kt-max >= 0 and at least 2 points"));
    }
    let mut s = String::from("kappa_t0,eps,r_tmr,r_single\n");
    for kt in linspace(0.0, kt_max, points) {
        let np = NoiseParams::memory(1.0 - rm, 1.0, kt);
        let r = tmr_reliability(TmrKind::Memory, &np)?;
        let _ = writeln!(s, "{kt:.16e},{:.16e},{:.16e},{:.16e}", np.eps, r.r, single_bit_reliability(kt));
    }
    Ok(s)
}

fn cmd_ftmem_opt(eps_m: f64, points: usize, format: Format, seed: u64) -> Outcome {
    if !(eps_m > 0.0 && eps_m < 0.05) {
        return Err(usage(format!("--eps-m must lie in (0, 0.05) (got {eps_m})")));
    }
    if points < 3 || points.is_multiple_of(2) {
        return Err(usage("--points must be odd and at least 3"));
    }
    let opt = tmr_memory_optimize(eps_m, 1.0)?;
    match format {
        Format::Json => Ok(report(
            json!({ "optimum": opt }),
            provenance("ftmem-opt", seed, json!({ "eps_m": eps_m, "points": points })),
        )),
        Format::Csv => {
            let half = (points - 1) / 2;
            let mut s = String::from("eps,kappa_eff_ratio\n");
            for i in 0..points {
                let e = eps_m * 10f64.powf((i as f64 - half as f64) / half as f64);
                let e = if i == half { eps_m } else { e };
                let _ = writeln!(s, "{e:.16e},{:.16e}", kappa_eff_ratio(e, eps_m));
            }
            Ok(s)
        }
    }
}

fn cmd_kl_check(code: CodeName, channel: ChannelName, param: f64, seed: u64) -> Outcome {
    if !(param > 0.0 && param < 1.0 / 3.0) {
        return Err(usage(format!("--param must lie in (0, 1/3) (got {param})")));
    }
    let kitten = kitten_code();
    let fs = kitten.fock_space();
    let rep = match (code, channel) {
        (CodeName::Repetition3, ChannelName::Bitflip) => {
            kl_check_scaling(&repetition3_code(), |p| Ok(bitflip_errors(p)), param)?
        }
        (CodeName::Repetition3, ChannelName::AmplitudeDamping) => {
            kl_check_scaling(&repetition3_code(), |p| Ok(amplitude_damping_register(p, 3)), param)?
        }
        (CodeName::Leung4, ChannelName::AmplitudeDamping) => {
            kl_check_scaling(&leung4_code(), |p| Ok(leung4_errors(p)), param)?
        }
        (CodeName::Kitten, ChannelName::PhotonLoss) => kl_check_scaling(
            kitten.code(),
            |kt| Ok(damped_kraus(&fs, &DampingParams::new(kt, 1.0, 1)?)?.ops().to_vec()),
            param,
        )?,
        _ => return Err(usage(format!("channel {channel:?} does not act on code {code:?}"))),
    };
    let mut body = rep.to_json();
    body["code"] = json!(format!("{code:?}").to_lowercase());
    body["channel"] = json!(format!("{channel:?}").to_lowercase());
    body["param"] = json!(param);
    Ok(report(
        body,
        provenance(
            "kl-check",
            seed,
            json!({ "code": format!("{code:?}").to_lowercase(), "channel": format!("{channel:?}").to_lowercase(), "param": param }),
        ),
    ))
}

/// Worst cardinal-state fidelity after `n` applications of `step`.
fn worst_after(
    code: &CodeSpace,
    n: usize,
    step: &dyn Fn(&DensityMatrix) -> qecw_core::Result<DensityMatrix>,
) -> qecw_core::Result<f64> {
    code.worst_cardinal_fidelity(|rho| {
        let mut r = rho.clone();
        for _ in 0..n {
            r = step(&r)?;
        }
        Ok(r)
    })
}

fn cmd_kitten(kappa_t: f64, cycles: usize, seed: u64) -> Outcome {
    if !(0.0..0.5).contains(&kappa_t) {
        return Err(usage(format!("--kappa-t must lie in [0, 0.5) (got {kappa_t})")));
    }
    if cycles == 0 {
        return Err(usage("--cycles must be at least 1"));
    }
    let code = kitten_code();
    let fs = code.fock_space();
    let round = kitten_round(&code, kappa_t, 4)?;
    let damp = damped_kraus(&fs, &DampingParams::new(kappa_t, 1.0, fs.dim() - 1)?)?;
    let fock01 = CodeSpace::new(
        "fock01",
        StateVector::basis(fs.dim(), 0),
        StateVector::basis(fs.dim(), 1),
        Vec::new(),
    )?;
    let mut rows = Vec::new();
    for n in 1..=cycles {
        let corrected = worst_after(code.code(), n, &|r| apply_channel(&round, r))?;
        let bare = worst_after(code.code(), n, &|r| apply_channel(&damp, r))?;
        let trivial = worst_after(&fock01, n, &|r| apply_channel(&damp, r))?;
        rows.push(json!({
            "cycle": n,
            "corrected_fidelity": corrected,
            "uncorrected_fidelity": bare,
            "fock01_fidelity": trivial,
        }));
    }
    Ok(report(
        json!({ "rounds": rows, "photon_loss_ratio": photon_loss_ratio(kappa_t.max(1e-6))? }),
        provenance("kitten", seed, json!({ "kappa_t": kappa_t, "cycles": cycles })),
    ))
}

fn c64_json(z: C64) -> Value {
    json!([z.re, z.im])
}

#[allow(clippy::too_many_arguments)]
fn cmd_gkp(
    lambda: f64,
    squeeze: f64,
    comb: usize,
    dim: usize,
    work_dim: Option<usize>,
    shift_x: f64,
    shift_p: f64,
    seed: u64,
) -> Outcome {
    let gp = GkpParams { lambda, squeeze, comb, fock_dim: dim, work_dim: work_dim.unwrap_or(dim + 150) };
    gp.validate()?;
    if !(shift_x.is_finite() && shift_p.is_finite()) {
        return Err(usage("shifts must be finite"));
    }
    let code = GkpCode::new(gp)?;
    let mut words = Vec::new();
    for mu in 0..2u8 {
        let psi = code.embedded(mu);
        let res = finite_energy_stabilizer_check(&gp, mu)?;
        words.push(json!({
            "mu": mu,
            "mean_photon": code.mean_photon(mu),
            "leakage": code.codeword(mu).leakage,
            "s_x": c64_json(code.expectation(&psi, GkpStabilizer::Sx)?),
            "s_p": c64_json(code.expectation(&psi, GkpStabilizer::Sp)?),
            "residual": res,
        }));
    }
    let psi = code.embedded(0);
    let hit = code.displace(&psi, PhaseVector::new(shift_x, shift_p))?;
    let fixed = code.correct_displacement(&hit)?;
    let body = json!({
        "codewords": words,
        "overlap": code.embedded(0).overlap_sq(&code.embedded(1)),
        "round_trip": {
            "shift": [shift_x, shift_p],
            "estimate": [fixed.dx, fixed.dp],
            "reliable": fixed.reliable,
            "fidelity_before": code.logical_fidelities(&hit)[0],
            "fidelity_after": code.logical_fidelities(&fixed.state)[0],
        },
    });
    Ok(report(
        body,
        provenance(
            "gkp",
            seed,
            json!({
                "lambda": lambda, "squeeze": squeeze, "comb": comb, "dim": dim,
                "work_dim": gp.work_dim, "shift_x": shift_x, "shift_p": shift_p,
            }),
        ),
    ))
}

fn cmd_toric(l: usize, p: f64, trials: u64, seed: u64) -> Outcome {
    check_prob("p", p)?;
    if trials == 0 {
        return Err(usage("--trials must be at least 1"));
    }
    let structure = stabilizer_structure(&build_lattice(l, l)?);
    let mc = toric_monte_carlo(l, p, trials, seed)?;
    Ok(report(
        json!({ "structure": structure, "monte_carlo": mc }),
        provenance("toric", seed, json!({ "L": l, "p": p, "trials": trials })),
    ))
}

fn parse_f64(s: &str, what: &str) -> Result<f64, Failure> {
    s.trim().parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| usage(format!("bad {what} {s:?}")))
}

fn parse_state(spec: &str, dim: usize) -> Result<DensityMatrix, Failure> {
    let (kind, arg) = spec.split_once(':').unwrap_or((spec, ""));
    let fs = FockSpace::new(dim)?;
    let psi = match kind {
        "vacuum" => StateVector::basis(dim, 0),
        "fock" => {
            let n: usize = arg.trim().parse().map_err(|_| usage(format!("bad Fock level {arg:?}")))?;
            fs.fock(n)?
        }
        "coherent" => {
            let (re, im) = arg.split_once(',').unwrap_or((arg, "0"));
            fs.coherent(C64::new(parse_f64(re, "amplitude")?, parse_f64(im, "amplitude")?))?
        }
        "cat" => {
            let (a, parity) = arg.split_once(',').unwrap_or((arg, "even"));
            let sign = match parity.trim() {
                "even" => 1.0,
                "odd" => -1.0,
                other => return Err(usage(format!("cat parity must be even or odd (got {other:?})"))),
            };
            fs.cat(C64::new(parse_f64(a, "cat amplitude")?, 0.0), sign)?
        }
        "file" => {
            let text = std::fs::read_to_string(arg).map_err(|e| usage(format!("cannot read {arg}: {e}")))?;
            if let Ok(psi) = StateVector::from_json_str(&text) {
                psi.normalize()?
            } else {
                let op = Operator::from_json_str(&text)?;
                return Ok(DensityMatrix::new(op.into_matrix())?);
            }
        }
        _ => return Err(usage(format!("unknown state {spec:?}"))),
    };
    Ok(psi.to_density()?)
}

fn cmd_wigner(state: &str, grid: usize, extent: f64, dim: usize) -> Outcome {
    if grid < 2 {
        return Err(usage("--grid must be at least 2"));
    }
    if !(extent > 0.0 && extent.is_finite()) {
        return Err(usage("--extent must be positive"));
    }
    let rho = parse_state(state, dim)?;
    let g = wigner_grid(&rho, (-extent, extent), (-extent, extent), grid, grid)?;
    Ok(g.to_csv())
}

fn run(cli: Cli) -> Outcome {
    let seed = resolve_seed(cli.seed)?;
    let out = match cli.command {
        Command::Repetition { m, eps_min, eps_max, points } => cmd_repetition(m, eps_min, eps_max, points)?,
        Command::Ftmem { rm, kt_max, points } => cmd_ftmem(rm, kt_max, points)?,
        Command::FtmemOpt { eps_m, points, format } => cmd_ftmem_opt(eps_m, points, format, seed)?,
        Command::KlCheck { code, channel, param } => cmd_kl_check(code, channel, param, seed)?,
        Command::Kitten { kappa_t, cycles } => cmd_kitten(kappa_t, cycles, seed)?,
        Command::Gkp { lambda, squeeze, comb, dim, work_dim, shift_x, shift_p } => {
            cmd_gkp(lambda, squeeze, comb, dim, work_dim, shift_x, shift_p, seed)?
        }
        Command::Toric { l, p, trials } => cmd_toric(l, p, trials, seed)?,
        Command::Wigner { state, grid, extent, dim } => cmd_wigner(&state, grid, extent, dim)?,
    };
    match &cli.output {
        Some(path) => std::fs::write(path, &out).map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))?,
        None => std::io::stdout().write_all(out.as_bytes()).map_err(|e| Failure::Io(e.to_string()))?,
    }
    Ok(out)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(_) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("qecw: invalid input: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Guard(msg)) => {
            eprintln!("qecw: numerical guard: {msg}");
            ExitCode::from(3)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("qecw: {msg}");
            ExitCode::from(1)
        }
    }
}
