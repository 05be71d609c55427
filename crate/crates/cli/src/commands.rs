use std::fs::File;
use std::path::Path;
use std::time::Instant;

use ghzkit::bell::{
    bell_value, bell_value_from_counts, classify_violation, critical_visibility_bell, default_functional,
    lhv_max_bruteforce_with, load_functional, phased_fourier_table, save_functional, white_noise_value, BellFunctional,
    BoundChain,
};
use ghzkit::measurement::{sample_counts_budgeted, split_shots, CountTable, ProbabilityTable};
use ghzkit::optics::{run_circuit, CircuitConfig, PhotonOverlap};
use ghzkit::seesaw::{seesaw_optimize, SeesawConfig};
use ghzkit::states::{damped_ghz, ghz_state, BranchDamping, GhzParams, NoiseModel};
use ghzkit::stats::{
    binomial_stderr, required_counts, stderr_witness, PValueQuery, PValueReport, BELL_SCALE, WITNESS_SCALE,
};
use ghzkit::witness::{
    critical_visibility_witness, ghz_fidelity_decomposition, witness_from_counts, witness_table, witness_w,
    WITNESS_THRESHOLD,
};
use ghzkit::{fidelity_with_pure, DensityMatrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::error::{CliError, CliResult};
use crate::output::{report_target, write_report, Manifest, Report};
use crate::{BellArgs, Cli, Command, FunctionalArgs, LhvArgs, OpticsArgs, PvalueArgs, SeesawArgs, StateArgs, WitnessArgs};

/// Largest joint Hilbert-space dimension accepted for state commands.
const MAX_TOTAL_DIM: usize = 729;

enum Table {
    Probabilities(ProbabilityTable),
    Counts(CountTable),
    Rows { header: Vec<&'static str>, rows: Vec<Vec<String>> },
}

struct Outcome {
    result: Value,
    seed: Option<u64>,
    table: Option<Table>,
}

impl Outcome {
    fn plain(result: Value) -> Self {
        Self { result, seed: None, table: None }
    }
}

pub fn run(cli: &Cli) -> CliResult<()> {
    let start = Instant::now();
    let outcome = match &cli.command {
        Command::Witness(a) => witness(a)?,
        Command::Bell(a) => bell(a)?,
        Command::Seesaw(a) => seesaw(a)?,
        Command::Lhv(a) => lhv(a)?,
        Command::Pvalue(a) => pvalue(a)?,
        Command::Optics(a) => optics(a)?,
        Command::Functional(a) => functional(a)?,
    };
    if let Some(path) = &cli.csv {
        let table = outcome
            .table
            .as_ref()
            .ok_or_else(|| CliError::Config(format!("--csv is not available for `{}`", cli.command.name())))?;
        write_table(path, table)?;
    }
    let report = Report {
        manifest: Manifest {
            tool: "ghzkit",
            version: env!("CARGO_PKG_VERSION"),
            command: cli.command.name(),
            config: &cli.command,
            seed: outcome.seed,
            wall_time_s: start.elapsed().as_secs_f64(),
        },
        result: outcome.result,
    };
    write_report(report_target(&cli.out, &cli.out_dir, cli.command.name()), &report)
}

fn write_table(path: &Path, table: &Table) -> CliResult<()> {
    let file = File::create(path)?;
    match table {
        Table::Probabilities(t) => t.write_csv(file)?,
        Table::Counts(t) => t.write_csv(file)?,
        Table::Rows { header, rows } => {
            let mut w = csv::Writer::from_writer(file);
            w.write_record(header)?;
            for r in rows {
                w.write_record(r)?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

fn load(source: &str) -> CliResult<BellFunctional> {
    if source == "default" {
        Ok(default_functional()?)
    } else {
        Ok(load_functional(source)?)
    }
}

fn require_seed(seed: Option<u64>) -> CliResult<u64> {
    seed.ok_or_else(|| CliError::Config("--seed is required when sampling".into()))
}

/// Prepared state and a short description of how it was made.
fn build_state(n: usize, d: usize, s: &StateArgs) -> CliResult<(DensityMatrix, String)> {
    if n < 2 || d < 2 {
        return Err(CliError::Config(format!("need n >= 2 and d >= 2, got n = {n}, d = {d}")));
    }
    if (d as f64).powi(n as i32) > MAX_TOTAL_DIM as f64 {
        return Err(CliError::Config(format!("d^n = {d}^{n} exceeds {MAX_TOTAL_DIM}")));
    }
    let noise = NoiseModel::new(s.visibility)?;
    let params = GhzParams::new(n, d)?;
    let (base, what) = if let Some(o) = &s.overlaps {
        if d != 3 || !(n == 3 || n == 4) {
            return Err(CliError::Config("--overlaps needs d = 3 and n = 3 or 4".into()));
        }
        let [bc, bd, cd] = o[..] else {
            return Err(CliError::Config(format!("--overlaps takes 3 values, got {}", o.len())));
        };
        let config = CircuitConfig { overlaps: PhotonOverlap::new(bc, bd, cd)?, trigger: n == 3, ..Default::default() };
        let report = run_circuit(&config)?;
        let state = match report.triggered {
            Some(t) => t.state,
            None => report.postselected.state,
        };
        (state, format!("optics(s_bc={bc}, s_bd={bd}, s_cd={cd})"))
    } else if let Some(l) = &s.damping {
        let damping = BranchDamping::from_upper(d, l)?;
        let rho = damped_ghz(params, &damping).map_err(|e| CliError::Config(format!("damping {l:?}: {e}")))?;
        (rho, format!("damped ghz({n},{d}) lambda={l:?}"))
    } else {
        (ghz_state(params).to_density(), format!("ghz({n},{d})"))
    };
    if noise.visibility < 1.0 {
        let mixed = base.mix(&DensityMatrix::maximally_mixed(base.profile().clone()), noise.visibility)?;
        Ok((mixed, format!("{what} at visibility {}", noise.visibility)))
    } else {
        Ok((base, what))
    }
}

fn witness(a: &WitnessArgs) -> CliResult<Outcome> {
    if a.critical_visibility {
        let v = critical_visibility_witness(a.n, a.d)?;
        return Ok(Outcome::plain(json!({
            "n": a.n,
            "d": a.d,
            "threshold": WITNESS_THRESHOLD,
            "critical_visibility": v,
        })));
    }
    let (rho, description) = build_state(a.n, a.d, &a.state)?;
    let exact = witness_w(&rho)?;
    let fidelity = fidelity_with_pure(&rho, &ghz_state(GhzParams::new(a.n, a.d)?))?;
    let Some(total) = a.shots_total else {
        return Ok(Outcome {
            result: json!({ "state": description, "exact": exact, "ghz_fidelity": fidelity }),
            seed: None,
            table: Some(Table::Probabilities(witness_table(&rho)?)),
        });
    };
    let seed = require_seed(a.seed)?;
    let table = witness_table(&rho)?;
    let settings: Vec<_> = table.settings().cloned().collect();
    let budget = split_shots(total, &settings);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let counts = sample_counts_budgeted(&table, &budget, &mut rng)?;
    let (estimate, totals) = witness_from_counts(&counts)?;
    let stderr = stderr_witness(&totals)?;
    let query = PValueQuery::new(estimate.w, WITNESS_THRESHOLD, WITNESS_SCALE, totals.pooled_total())?;
    Ok(Outcome {
        result: json!({
            "state": description,
            "exact": exact,
            "ghz_fidelity": fidelity,
            "estimate": estimate,
            "totals": totals,
            "stderr": stderr.stderr,
            "significance": PValueReport::new(&query),
        }),
        seed: Some(seed),
        table: Some(Table::Counts(counts)),
    })
}

fn bell(a: &BellArgs) -> CliResult<Outcome> {
    let f = load(&a.functional)?;
    let s = f.scenario();
    let (rho, description) = build_state(s.parties, s.outputs, &a.state)?;
    let settings = f.support();
    let table = phased_fourier_table(&rho, &settings)?;
    let exact = bell_value(&f, &table)?;
    let chain = f.reference.clone();
    let scale = chain.as_ref().map_or(BELL_SCALE, |c| c.algebraic_max);
    let (value, counts, sampled) = match a.shots_total {
        Some(total) => {
            let seed = require_seed(a.seed)?;
            let budget = split_shots(total, &settings);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let counts = sample_counts_budgeted(&table, &budget, &mut rng)?;
            let (value, _) = bell_value_from_counts(&f, &counts)?;
            (value, Some(total), Some((seed, counts)))
        }
        None => (exact, None, None),
    };
    let bounds = chain.as_ref().map(|c| chain_report(c, value, scale, counts, &f)).transpose()?;
    let stderr = counts.map(|n| binomial_stderr(value, scale, n)).transpose()?;
    let result = json!({
        "functional": f.name,
        "state": description,
        "exact": exact,
        "value": value,
        "shots_total": counts,
        "stderr": stderr.map(|e| e.stderr),
        "white_noise_value": white_noise_value(&f),
        "tier": chain.as_ref().map(|c| classify_violation(value, c)),
        "tier_label": chain.as_ref().map(|c| classify_violation(value, c).label()),
        "bounds": bounds,
    });
    Ok(match sampled {
        Some((seed, counts)) => Outcome { result, seed: Some(seed), table: Some(Table::Counts(counts)) },
        None => Outcome { result, seed: None, table: Some(Table::Probabilities(table)) },
    })
}

fn chain_report(c: &BoundChain, value: f64, scale: f64, counts: Option<u64>, f: &BellFunctional) -> CliResult<Vec<Value>> {
    let links = std::iter::once((None, c.lhv)).chain(c.dim_bounds.iter().map(|(d, b)| (Some(d.clone()), *b)));
    links
        .map(|(dims, bound)| {
            let p = counts
                .map(|n| PValueQuery::new(value.min(scale), bound, scale, n).map(|q| PValueReport::new(&q)))
                .transpose()?;
            Ok(json!({
                "dims": dims,
                "bound": bound,
                "violated": value > bound,
                "critical_visibility": critical_visibility_bell(f, bound).ok(),
                "significance": p,
            }))
        })
        .collect()
}

fn seesaw(a: &SeesawArgs) -> CliResult<Outcome> {
    let f = load(&a.functional)?;
    if a.dims.iter().any(|&d| d < 2) {
        return Err(CliError::Config(format!("dimensions must be >= 2, got {:?}", a.dims)));
    }
    let config = SeesawConfig {
        restarts: a.restarts,
        max_sweeps: a.max_sweeps,
        tolerance: a.tolerance,
        seed: a.seed,
        povm_polish: !a.projective_only,
        parallel: true,
    };
    let r = seesaw_optimize(&f, &a.dims, &config)?;
    let reference = f.reference.as_ref().and_then(|c| c.bound_for(&a.dims));
    let rows = r
        .restarts
        .iter()
        .map(|x| vec![x.index.to_string(), x.final_value.to_string(), x.sweeps.to_string(), x.converged.to_string()])
        .collect();
    Ok(Outcome {
        result: json!({
            "best_value": r.best_value,
            "reference_bound": reference,
            "difference": reference.map(|b| r.best_value - b),
            "exceeds_reference": reference.map(|b| r.best_value > b),
            "seesaw": r,
        }),
        seed: Some(a.seed),
        table: Some(Table::Rows { header: vec!["restart", "final_value", "sweeps", "converged"], rows }),
    })
}

fn lhv(a: &LhvArgs) -> CliResult<Outcome> {
    let f = load(&a.functional)?;
    let (value, strategy) = lhv_max_bruteforce_with(&f, a.cap, !a.serial)?;
    let s = f.scenario();
    let joint = (s.outputs as u128).pow(s.inputs as u32).pow(s.parties as u32);
    let reference = f.reference.as_ref().map(|c| c.lhv);
    Ok(Outcome::plain(json!({
        "functional": f.name,
        "value": value,
        "strategy": strategy,
        "joint_strategies": joint,
        "reference_bound": reference,
        "matches_reference": reference.map(|r| (r - value).abs() < 1e-9),
    })))
}

fn pvalue(a: &PvalueArgs) -> CliResult<Outcome> {
    let q = PValueQuery::new(a.observed, a.bound, a.scale, a.counts)?;
    let report = PValueReport::new(&q);
    let required = match a.target {
        Some(t) if q.is_violation() => Some(required_counts(a.observed - a.bound, a.bound, a.scale, t)?),
        Some(_) => return Err(CliError::Config("--target needs an observed value above the bound".into())),
        None => None,
    };
    Ok(Outcome {
        result: json!({ "report": report, "target": a.target, "required_counts": required }),
        seed: None,
        table: Some(Table::Rows {
            header: vec!["observed", "bound", "scale", "N", "kl", "p_value"],
            rows: vec![vec![
                a.observed.to_string(),
                a.bound.to_string(),
                a.scale.to_string(),
                a.counts.to_string(),
                report.kl.to_string(),
                report.p_value.to_string(),
            ]],
        }),
    })
}

fn optics(a: &OpticsArgs) -> CliResult<Outcome> {
    let mut config = match &a.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            serde_json::from_str::<CircuitConfig>(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        }
        None => CircuitConfig::default(),
    };
    if let Some(o) = &a.overlaps {
        let [bc, bd, cd] = o[..] else {
            return Err(CliError::Config(format!("--overlaps takes 3 values, got {}", o.len())));
        };
        config.overlaps = PhotonOverlap::new(bc, bd, cd)?;
    }
    config.trigger |= a.trigger;
    let report = run_circuit(&config)?;
    let decomposition = ghz_fidelity_decomposition(&report.postselected.state).ok();
    Ok(Outcome::plain(json!({
        "circuit": config,
        "report": report,
        "branch_decomposition": decomposition,
    })))
}

fn functional(a: &FunctionalArgs) -> CliResult<Outcome> {
    let f = load(&a.functional)?;
    save_functional(&f, &a.write)?;
    let s = f.scenario();
    Ok(Outcome::plain(json!({
        "name": f.name,
        "path": a.write,
        "scenario": { "parties": s.parties, "inputs": s.inputs, "outputs": s.outputs },
        "supported_settings": f.support().len(),
        "nonzero_terms": f.terms().count(),
    })))
}
