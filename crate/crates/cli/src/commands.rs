//! One function per subcommand. Each reads the problem file, runs the core
//! operations over the level list, and writes its artifacts to the output
//! directory.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use potlab_core::ensemble::{deviation_from_sample, sample_pn, SamplerMethod};
use potlab_core::equilibrium::{
    equilibrium_solve, fekete_empirical_convergence, transfinite_diameter, EquilibriumMeasure,
    EquilibriumOptions,
};
use potlab_core::export::{christoffel_table, equilibrium_table, fmt_f64, write_json, Table};
use potlab_core::measures::WeightedProblem;
use potlab_core::orthopoly::{
    christoffel, level_measure, orthonormal_basis, orthonormality_residual, BasisOptions,
    Construction,
};
use potlab_core::partition::{partition_hom_gram, partition_monte_carlo, partition_norm_product};
use potlab_core::problem::ProblemFile;
use potlab_core::unbounded::{free_energy_unbounded, restricted_norm_compare};
use potlab_core::{Error, Precision};

use crate::plot::{line_plot, Series};
use crate::verify::{run_suite, VerifyConfig};
use crate::{prepare_out_dir, Failure, EXIT_OK, EXIT_VERIFY_FAILED};

/// Options shared by every problem-driven command.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: PathBuf,
    pub levels: Vec<usize>,
    pub seed: u64,
    pub out: PathBuf,
    pub precision: Option<Precision>,
}

impl RunConfig {
    fn load(&self) -> Result<ProblemFile, Failure> {
        if self.levels.is_empty() || self.levels.windows(2).any(|p| p[1] <= p[0]) {
            return Err(Failure::config(
                "level list must be nonempty and strictly increasing",
            ));
        }
        prepare_out_dir(&self.out)?;
        Ok(ProblemFile::load(&self.problem)?)
    }

    fn max_level(&self) -> usize {
        *self.levels.last().unwrap_or(&0)
    }

    fn precision(&self, file: &ProblemFile) -> Precision {
        self.precision.unwrap_or(file.precision.mode)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

fn write_svg(path: &Path, svg: &str) -> Result<(), Failure> {
    std::fs::write(path, svg)
        .map_err(|e| Failure::config(format!("cannot write {}: {e}", path.display())))
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn basis_options(method: Construction, precision: Precision) -> BasisOptions {
    BasisOptions { method, precision }
}

#[derive(Serialize)]
struct OrthoArtifact {
    #[serde(flatten)]
    basis: potlab_core::orthopoly::OrthoBasisExport,
    orthonormality_residual: f64,
}

pub fn cmd_ortho(cfg: &RunConfig, method: Construction) -> Result<i32, Failure> {
    let file = cfg.load()?;
    let problem = file.problem(cfg.max_level())?;
    let opts = basis_options(method, cfg.precision(&file));
    let rows = cfg
        .levels
        .par_iter()
        .map(|&n| {
            let b = orthonormal_basis(&problem, n, opts)?;
            let (nodes, weights) = level_measure(&problem, n);
            let residual = orthonormality_residual(&b, &nodes, &weights);
            Ok((n, b, residual))
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let mut t = Table::new(&[
        "n",
        "method",
        "gram_condition",
        "orthonormality_residual",
        "log_Z_norm",
    ]);
    for (n, b, residual) in rows {
        write_json(
            &cfg.path(&format!("ortho_n{n}.json")),
            &OrthoArtifact {
                basis: b.export(),
                orthonormality_residual: residual,
            },
        )?;
        t.push(vec![
            n.to_string(),
            format!("{:?}", b.method()).to_lowercase(),
            fmt_f64(b.gram_condition()),
            fmt_f64(residual),
            fmt_f64(partition_norm_product(&b).log_z),
        ]);
    }
    t.write(&cfg.path("ortho.csv"))?;
    Ok(EXIT_OK)
}

pub fn cmd_christoffel(cfg: &RunConfig, per_component: usize) -> Result<i32, Failure> {
    let file = cfg.load()?;
    let problem = file.problem(cfg.max_level())?;
    let opts = basis_options(Construction::Auto, cfg.precision(&file));
    let grid = problem.domain.sample_grid(per_component);
    for &n in &cfg.levels {
        let b = orthonormal_basis(&problem, n, opts)?;
        christoffel_table(&christoffel(&b, &grid))
            .write(&cfg.path(&format!("christoffel_n{n}.csv")))?;
    }
    Ok(EXIT_OK)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Routes {
    pub norm: bool,
    pub gram: bool,
    pub mc: bool,
}

impl Routes {
    pub fn parse(s: &str) -> Result<Self, String> {
        let mut r = Routes {
            norm: false,
            gram: false,
            mc: false,
        };
        for part in s.split(',') {
            match part.trim() {
                "norm" => r.norm = true,
                "gram" => r.gram = true,
                "mc" => r.mc = true,
                "all" => {
                    r = Routes {
                        norm: true,
                        gram: true,
                        mc: true,
                    }
                }
                other => return Err(format!("unknown route `{other}` (norm, gram, mc, all)")),
            }
        }
        Ok(r)
    }
}

pub fn cmd_partition(cfg: &RunConfig, routes: Routes, samples: usize) -> Result<i32, Failure> {
    let file = cfg.load()?;
    let problem = file.problem(cfg.max_level())?;
    let precision = cfg.precision(&file);
    let rows = cfg
        .levels
        .iter()
        .map(|&n| {
            let norm = if routes.norm {
                let b =
                    orthonormal_basis(&problem, n, basis_options(Construction::Auto, precision))?;
                Some(partition_norm_product(&b).log_z)
            } else {
                None
            };
            let gram = if routes.gram {
                Some(partition_hom_gram(&problem, n, precision)?.log_z)
            } else {
                None
            };
            let mc = if routes.mc {
                Some(partition_monte_carlo(&problem, n, samples, cfg.seed)?)
            } else {
                None
            };
            Ok((n, norm, gram, mc))
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let mut t = Table::new(&[
        "n",
        "log_Z_norm",
        "log_Z_gram",
        "log_Z_mc",
        "stderr",
        "free_energy",
    ]);
    let mut series = Vec::new();
    for (n, norm, gram, mc) in &rows {
        let best = norm.or(*gram).or(mc.map(|m| m.log_z));
        let free = best.and_then(|l| potlab_core::partition::free_energy(l, *n));
        if let Some(f) = free {
            series.push((*n as f64, f));
        }
        t.push(vec![
            n.to_string(),
            opt(*norm),
            opt(*gram),
            opt(mc.map(|m| m.log_z)),
            opt(mc.map(|m| m.stderr_log)),
            opt(free),
        ]);
    }
    t.write(&cfg.path("partition.csv"))?;
    write_svg(
        &cfg.path("free_energy.svg"),
        &line_plot(
            "free energy",
            "n",
            "Z_n^(1/n^2)",
            &[Series {
                label: "Z_n^(1/n^2)",
                points: series,
            }],
        ),
    )?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct EquilibriumSummary {
    cells: usize,
    energy: f64,
    delta_w: f64,
    iterations: usize,
    residual: f64,
    support_hull: (f64, f64),
    variational_relative_spread: f64,
    variational_min_off_support_excess: f64,
}

fn solve(problem: &WeightedProblem, cells: usize) -> Result<EquilibriumMeasure, Error> {
    equilibrium_solve(
        &problem.domain,
        &problem.weight,
        EquilibriumOptions {
            cells,
            ..EquilibriumOptions::default()
        },
    )
}

pub fn cmd_equilibrium(cfg: &RunConfig, cells: usize) -> Result<i32, Failure> {
    let file = cfg.load()?;
    let problem = file.problem(cfg.max_level())?;
    let eq = solve(&problem, cells)?;
    equilibrium_table(&eq).write(&cfg.path("equilibrium.csv"))?;
    let v = eq.variational_residual();
    write_json(
        &cfg.path("equilibrium.json"),
        &EquilibriumSummary {
            cells,
            energy: eq.energy,
            delta_w: eq.delta_w,
            iterations: eq.iterations,
            residual: eq.residual,
            support_hull: eq.support_hull(),
            variational_relative_spread: v.relative_spread,
            variational_min_off_support_excess: v.min_off_support_excess,
        },
    )?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct FeketeArtifact<'a> {
    n: usize,
    points: &'a [num_complex::Complex64],
    log_wvdm: f64,
    diameter_estimate: Option<f64>,
}

pub fn cmd_fekete(cfg: &RunConfig, grid_factor: usize, cells: usize) -> Result<i32, Failure> {
    let file = cfg.load()?;
    let problem = file.problem(cfg.max_level())?;
    let eq = match solve(&problem, cells) {
        Ok(eq) => Some(eq),
        Err(Error::Domain(m)) => {
            log::warn!("no energy route: {m}");
            None
        }
        Err(e) => return Err(e.into()),
    };
    let td = transfinite_diameter(
        &problem.domain,
        &problem.weight,
        &cfg.levels,
        grid_factor,
        eq.as_ref(),
    )?;
    let dists = match &eq {
        Some(eq) => Some(fekete_empirical_convergence(
            &problem.domain,
            &problem.weight,
            &cfg.levels,
            grid_factor,
            eq,
        )?),
        None => None,
    };
    let mut t = Table::new(&["n", "log_wvdm", "diameter_estimate", "weak_star_distance"]);
    for (i, c) in td.configurations.iter().enumerate() {
        write_json(
            &cfg.path(&format!("fekete_n{}.json", c.level)),
            &FeketeArtifact {
                n: c.level,
                points: &c.points,
                log_wvdm: c.log_wvdm,
                diameter_estimate: c.diameter_estimate,
            },
        )?;
        t.push(vec![
            c.level.to_string(),
            fmt_f64(c.log_wvdm),
            opt(c.diameter_estimate),
            opt(dists.as_ref().map(|d| d[i].1)),
        ]);
    }
    t.write(&cfg.path("fekete.csv"))?;
    write_json(
        &cfg.path("transfinite.json"),
        &serde_json::json!({
            "levels": td.levels,
            "estimates": td.estimates,
            "extrapolated": td.extrapolated,
            "energy_route": td.energy_route,
            "relative_gap": td.relative_gap,
        }),
    )?;
    if let Some(d) = dists {
        write_svg(
            &cfg.path("fekete_weak_star.svg"),
            &line_plot(
                "Fekete empirical measures",
                "n",
                "distance to equilibrium",
                &[Series {
                    label: "weak-* distance",
                    points: d.iter().map(|&(n, x)| (n as f64, x)).collect(),
                }],
            ),
        )?;
    }
    Ok(EXIT_OK)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviationOptions {
    /// Fixed `η`; default `δ^w n^{-1/2}` per level, skipping levels where
    /// that is not below `δ^w`.
    pub eta: Option<f64>,
    /// Fixed `δ^w`; default from the equilibrium solve.
    pub delta_w: Option<f64>,
    pub samples: usize,
    pub method: SamplerMethod,
    pub dump: bool,
    pub cells: usize,
}

pub fn cmd_deviation(cfg: &RunConfig, o: DeviationOptions) -> Result<i32, Failure> {
    let file = cfg.load()?;
    let problem = file.problem(cfg.max_level())?;
    let delta = match o.delta_w {
        Some(d) => d,
        None => solve(&problem, o.cells)?.delta_w,
    };
    if let Some(eta) = o.eta {
        if !(eta > 0.0 && eta < delta) {
            return Err(Failure::config(format!(
                "--eta must lie in (0, delta_w) = (0, {delta}), got {eta}"
            )));
        }
    }
    let mut t = Table::new(&["n", "eta", "estimate", "stderr", "bound", "pass"]);
    let mut est = Vec::new();
    let mut bound = Vec::new();
    for &n in &cfg.levels {
        let eta = o.eta.unwrap_or(delta / (n as f64).sqrt());
        if eta >= delta {
            log::warn!("n = {n}: default eta = {eta} is not below delta_w; level skipped");
            continue;
        }
        let b = orthonormal_basis(&problem, n, BasisOptions::default())?;
        let sample = sample_pn(
            &problem,
            &b,
            o.samples,
            cfg.seed.wrapping_add(n as u64),
            o.method,
        )?;
        let r = deviation_from_sample(&sample, &problem.weight, eta, delta)?;
        t.push(vec![
            n.to_string(),
            fmt_f64(eta),
            fmt_f64(r.estimate),
            fmt_f64(r.stderr),
            fmt_f64(r.bound),
            r.within_bound().to_string(),
        ]);
        est.push((n as f64, r.estimate));
        bound.push((n as f64, r.bound));
        if o.dump {
            let mut s = String::new();
            for c in &sample.configurations {
                let row: Vec<String> = c
                    .iter()
                    .flat_map(|z| [fmt_f64(z.re), fmt_f64(z.im)])
                    .collect();
                s.push_str(&row.join(","));
                s.push('\n');
            }
            let path = cfg.path(&format!("samples_n{n}.csv"));
            std::fs::write(&path, s)
                .map_err(|e| Failure::config(format!("cannot write {}: {e}", path.display())))?;
        }
    }
    t.write(&cfg.path("deviation.csv"))?;
    write_svg(
        &cfg.path("deviation.svg"),
        &line_plot(
            "large deviations",
            "n",
            "probability",
            &[
                Series {
                    label: "estimate",
                    points: est,
                },
                Series {
                    label: "bound",
                    points: bound,
                },
            ],
        ),
    )?;
    Ok(EXIT_OK)
}

pub fn cmd_unbounded(cfg: &RunConfig, tol: f64) -> Result<i32, Failure> {
    let file = cfg.load()?;
    if !file.is_real_line() {
        return Err(Failure::config(
            "field `domain`: the unbounded command needs kind `real-line`",
        ));
    }
    let s = free_energy_unbounded(&file.weight, &cfg.levels, tol)?;
    let mut t = Table::new(&[
        "n",
        "A",
        "log_Z_fullline",
        "log_Z_restricted",
        "free_energy_fullline",
        "free_energy_restricted",
        "delta_w_energy_route",
    ]);
    for (i, &n) in s.levels.iter().enumerate() {
        t.push(vec![
            n.to_string(),
            fmt_f64(s.half_widths[i]),
            fmt_f64(s.log_z_full[i]),
            fmt_f64(s.log_z_restricted[i]),
            fmt_f64(s.free_full[i]),
            fmt_f64(s.free_restricted[i]),
            fmt_f64(s.delta_energy),
        ]);
        let report = restricted_norm_compare(&file.weight, n, s.half_widths[i])?;
        write_json(&cfg.path(&format!("restriction_n{n}.json")), &report)?;
    }
    t.write(&cfg.path("unbounded.csv"))?;
    let pts = |v: &[f64]| {
        s.levels
            .iter()
            .zip(v)
            .map(|(&n, &x)| (n as f64, x))
            .collect()
    };
    write_svg(
        &cfg.path("unbounded_free_energy.svg"),
        &line_plot(
            "free energy on the real line",
            "n",
            "Z_n^(1/n^2)",
            &[
                Series {
                    label: "full line",
                    points: pts(&s.free_full),
                },
                Series {
                    label: "restricted",
                    points: pts(&s.free_restricted),
                },
                Series {
                    label: "exp(-I^w)",
                    points: s
                        .levels
                        .iter()
                        .map(|&n| (n as f64, s.delta_energy))
                        .collect(),
                },
            ],
        ),
    )?;
    Ok(EXIT_OK)
}

pub fn cmd_verify(cfg: &VerifyConfig, out: Option<&Path>) -> Result<i32, Failure> {
    let report = run_suite(cfg)?;
    print!("{}", report.table());
    if let Some(dir) = out {
        prepare_out_dir(&dir.to_path_buf())?;
        let path = dir.join("verify_report.json");
        std::fs::write(&path, report.to_json()?)
            .map_err(|e| Failure::config(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(if report.all_pass() {
        EXIT_OK
    } else {
        EXIT_VERIFY_FAILED
    })
}
