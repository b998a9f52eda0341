use std::path::Path;

use serde::{Deserialize, Serialize};
use simplexdyn::jko::{jko_flow_vs_heat, GaussianStart, DEFAULT_LEVELS};
use simplexdyn::replicator::{fmt_full, integrate_replicator, phase_portrait};
use simplexdyn::sde::{
    bm_path, donsker_rescaled, run_ensemble, sde_path, simplex_random_walk, wong_zakai_ensemble, wong_zakai_path, InitialLaw,
};
use simplexdyn::{Composition, DriftKind, OdeConfig, SdeConfig};

use crate::config::{create_dir, load, write, write_json, Loaded, MatrixSpec, Provenance};
use crate::failure::Failure;

fn one() -> usize {
    1
}

fn default_levels() -> usize {
    DEFAULT_LEVELS
}

/// One simulation per config file, selected by `kind`. Every kind takes a
/// seed, including the deterministic ones, so that configs never omit it.
#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Simulation {
    /// Deterministic replicator flow, RK4 in the chart.
    Ode {
        seed: u64,
        #[serde(rename = "A")]
        a: MatrixSpec,
        p0: Composition,
        t_end: f64,
        dt: f64,
        #[serde(default = "one")]
        record_every: usize,
    },
    /// One Euler-Maruyama path of the stochastic replicator equation.
    Sde {
        seed: u64,
        drift: DriftKind,
        p0: Composition,
        sigma: f64,
        t_end: f64,
        dt: f64,
        #[serde(default = "one")]
        record_every: usize,
    },
    /// One path of Brownian motion on the simplex.
    Bm {
        seed: u64,
        p0: Composition,
        sigma: f64,
        t_end: f64,
        dt: f64,
        #[serde(default = "one")]
        record_every: usize,
    },
    /// Terminal states of independent Euler-Maruyama paths.
    Ensemble {
        seed: u64,
        drift: DriftKind,
        initial: InitialLaw,
        sigma: f64,
        t_end: f64,
        dt: f64,
        paths: usize,
    },
    /// Replicator flow driven by colored-noise fitness; with `paths` the
    /// terminal states of an ensemble, otherwise one recorded path.
    WongZakai {
        seed: u64,
        lambda_corr: f64,
        p0: Composition,
        t_end: f64,
        dt: f64,
        #[serde(default = "one")]
        record_every: usize,
        paths: Option<usize>,
    },
    /// Diffusively rescaled simplex random walk on a uniform time grid.
    Walk {
        seed: u64,
        p0: Composition,
        n_steps: usize,
        t_end: f64,
        grid_points: usize,
    },
    /// JKO steps for the heat flow from a Gaussian, against the exact solution.
    Jko {
        seed: u64,
        mean: f64,
        sd: f64,
        #[serde(default = "default_levels")]
        levels: usize,
        t_end: f64,
        n_steps: usize,
    },
    /// Replicator vector field on a barycentric grid, `n = 3`.
    Portrait {
        seed: u64,
        #[serde(rename = "A")]
        a: MatrixSpec,
        grid: usize,
    },
}

impl Simulation {
    fn seed(&self) -> u64 {
        match self {
            Simulation::Ode { seed, .. }
            | Simulation::Sde { seed, .. }
            | Simulation::Bm { seed, .. }
            | Simulation::Ensemble { seed, .. }
            | Simulation::WongZakai { seed, .. }
            | Simulation::Walk { seed, .. }
            | Simulation::Jko { seed, .. }
            | Simulation::Portrait { seed, .. } => *seed,
        }
    }
}

#[derive(Debug, Serialize)]
struct Sidecar {
    provenance: Provenance,
    artifact: String,
    rows: usize,
}

/// A finished artifact: file stem and CSV bytes.
struct Csv {
    stem: &'static str,
    bytes: Vec<u8>,
}

impl Csv {
    fn rows(&self) -> usize {
        self.bytes.iter().filter(|b| **b == b'\n').count().saturating_sub(1)
    }
}

fn csv_of(stem: &'static str, write: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Csv {
    let mut bytes = Vec::new();
    write(&mut bytes).expect("writing to memory cannot fail");
    Csv { stem, bytes }
}

fn sde_config(sigma: f64, t_end: f64, dt: f64, seed: u64, record_every: usize) -> Result<SdeConfig, Failure> {
    let cfg = SdeConfig::new(sigma, t_end, dt, seed).map_err(Failure::setup)?.record_every(record_every);
    cfg.validate().map_err(Failure::setup)?;
    Ok(cfg)
}

fn run(ctx: &Loaded<Simulation>) -> Result<Csv, Failure> {
    Ok(match &ctx.config {
        Simulation::Ode { a, p0, t_end, dt, record_every, .. } => {
            let a = a.load(ctx)?;
            let cfg = OdeConfig::new(*t_end, *dt, *record_every).map_err(Failure::setup)?;
            let traj = integrate_replicator(&a, p0, &cfg).map_err(Failure::run)?;
            csv_of("trajectory", |w| traj.write_csv(w))
        }
        Simulation::Sde { seed, drift, p0, sigma, t_end, dt, record_every } => {
            let cfg = sde_config(*sigma, *t_end, *dt, *seed, *record_every)?;
            let traj = sde_path(drift, p0, &cfg).map_err(Failure::run)?;
            csv_of("trajectory", |w| traj.write_csv(w))
        }
        Simulation::Bm { seed, p0, sigma, t_end, dt, record_every } => {
            let cfg = sde_config(*sigma, *t_end, *dt, *seed, *record_every)?;
            let traj = bm_path(p0, &cfg).map_err(Failure::run)?;
            csv_of("trajectory", |w| traj.write_csv(w))
        }
        Simulation::Ensemble { seed, drift, initial, sigma, t_end, dt, paths } => {
            let cfg = sde_config(*sigma, *t_end, *dt, *seed, 1)?;
            let ens = run_ensemble(drift, initial, &cfg, *paths).map_err(Failure::run)?;
            csv_of("ensemble", |w| ens.write_csv(w))
        }
        Simulation::WongZakai { seed, lambda_corr, p0, t_end, dt, record_every, paths } => {
            // The colored-noise flow converges to the Stratonovich equation
            // with σ = √2; sigma only labels the configuration here.
            let cfg = sde_config(2f64.sqrt(), *t_end, *dt, *seed, *record_every)?;
            match paths {
                Some(m) => {
                    let ens = wong_zakai_ensemble(*lambda_corr, p0, &cfg, *m).map_err(Failure::run)?;
                    csv_of("ensemble", |w| ens.write_csv(w))
                }
                None => {
                    let traj = wong_zakai_path(*lambda_corr, p0, &cfg).map_err(Failure::run)?;
                    csv_of("trajectory", |w| traj.write_csv(w))
                }
            }
        }
        Simulation::Walk { seed, p0, n_steps, t_end, grid_points } => {
            if *grid_points < 2 || !(t_end.is_finite() && *t_end > 0.0) {
                return Err(Failure::Parse("walk needs grid_points >= 2 and t_end > 0".into()));
            }
            let grid: Vec<f64> = (0..*grid_points).map(|k| t_end * k as f64 / (*grid_points - 1) as f64).collect();
            let steps = (*n_steps as f64 * t_end).ceil() as usize + 1;
            let walk = simplex_random_walk(p0, steps, *seed).map_err(Failure::run)?;
            let traj = donsker_rescaled(&walk, *n_steps, &grid).map_err(Failure::run)?;
            csv_of("trajectory", |w| traj.write_csv(w))
        }
        Simulation::Jko { mean, sd, levels, t_end, n_steps, .. } => {
            let flow = jko_flow_vs_heat(GaussianStart { mean: *mean, sd: *sd }, *levels, *t_end, *n_steps).map_err(Failure::run)?;
            csv_of("jko", |w| flow.write_csv(w))
        }
        Simulation::Portrait { a, grid, .. } => {
            let a = a.load(ctx)?;
            let field = phase_portrait(&a, *grid).map_err(Failure::run)?;
            csv_of("portrait", |w| {
                use std::io::Write;
                writeln!(w, "p_1,p_2,p_3,v_1,v_2,v_3")?;
                for (p, v) in &field {
                    let cells: Vec<String> = p.as_slice().iter().chain(v).map(|x| fmt_full(*x)).collect();
                    writeln!(w, "{}", cells.join(","))?;
                }
                Ok(())
            })
        }
    })
}

pub fn simulate(config: &Path, out: &Path) -> Result<(), Failure> {
    let loaded = load::<Simulation>(config)?;
    let csv = run(&loaded)?;
    create_dir(out)?;
    let data = out.join(format!("{}.csv", csv.stem));
    write(&data, &csv.bytes)?;
    let sidecar = Sidecar {
        provenance: loaded.provenance("simulate", Some(loaded.config.seed())),
        artifact: format!("{}.csv", csv.stem),
        rows: csv.rows(),
    };
    write_json(&out.join(format!("{}.json", csv.stem)), &sidecar)?;
    println!("wrote {}", data.display());
    Ok(())
}
