use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use gfpk_core::diagnostics::{
    fisher_energy, gradient_check, log_moment_report, sample_nodes, tail_check,
};
use gfpk_core::ladder::{run_ladder, LadderConfig};
use gfpk_core::linear::{default_bump_grid, default_bumps, residual_suite};
use gfpk_core::oracles::{
    oracle_1d, oracle_fd_2d, oracle_sde, oracle_vlasov_1d, Estimate, SdeOptions,
};
use gfpk_core::{
    assemble, b1_bound, fixed_point_solve, sweep, BoundReport, ChaosBasis, ChaosDensity,
    DriftField, Error, MeasureArg, QuadratureGrid,
};

use crate::config::{read_density, DriftConfig, Mode, OracleConfig, RunConfig};
use crate::report::{Check, RunReport, TraceSummary};
use crate::{CliError, EXIT_CHECK_FAILED, EXIT_PASS, EXIT_SOLVER};

/// Tolerance of the exact-gradient check against central differences.
const GRADIENT_TOL: f64 = 1e-6;

#[derive(Debug)]
pub struct RunOutcome {
    pub report: RunReport,
    pub exit_code: i32,
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    out: &'a Path,
    report: RunReport,
    clock: Instant,
}

impl Ctx<'_> {
    fn write(&mut self, name: &str, file: &str, contents: &str) -> Result<(), CliError> {
        let path = self.out.join(file);
        std::fs::write(&path, contents).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })?;
        self.report.artifacts.insert(name.into(), file.into());
        Ok(())
    }

    fn lap(&mut self, stage: &str) {
        let now = Instant::now();
        self.report
            .timings
            .insert(stage.into(), now.duration_since(self.clock).as_secs_f64());
        self.clock = now;
    }

    /// Residual suite, asserted bounds, monitored functionals and the
    /// density artifact for a solved (or loaded) density.
    fn assess(
        &mut self,
        rho: &ChaosDensity,
        v: &DriftField,
        p: &ChaosDensity,
        grid: &QuadratureGrid,
        system_norm: f64,
    ) -> Result<(), CliError> {
        let k = rho.dim();
        let bump_grid = match self.cfg.residual.bump_quadrature {
            Some(q) => QuadratureGrid::tensor(q, k)?,
            None => default_bump_grid(k, grid.q())?,
        };
        let bumps = default_bumps(k, self.cfg.residual.bumps);
        self.report.residuals = Some(residual_suite(
            rho,
            v,
            p,
            grid,
            system_norm,
            &bumps,
            &bump_grid,
        )?);
        self.lap("residuals");

        let c0 = v.c0();
        let b = b1_bound(c0)?;
        let l2sq = rho.l2_norm_sq();
        self.report.bounds.push(BoundReport {
            name: "schauder_l2".into(),
            left: l2sq,
            right: b,
            pass: Some(l2sq <= b),
            tolerance: 0.0,
            inputs: BTreeMap::from([("c0".to_string(), c0)]),
            rows: Vec::new(),
        });
        self.report.bounds.push(tail_check(
            rho,
            v.sigma_inf(),
            &self.cfg.bounds.tail_levels,
            grid,
        )?);
        self.report.bounds.push(log_moment_report(
            rho,
            self.cfg.bounds.log_moment_alpha,
            v,
            p,
            grid,
        )?);
        self.report.fisher = Some(fisher_energy(rho, v, p, grid)?);
        let points = sample_nodes(grid, self.cfg.bounds.gradient_points, self.cfg.seed);
        self.report.checks.push(Check::at_most(
            "gradient_check",
            gradient_check(rho, &points),
            GRADIENT_TOL,
        ));
        self.lap("bounds");

        self.write("density", "density.json", &rho.to_json()?)?;
        Ok(())
    }
}

/// Validates `cfg` for `mode`, runs it and writes the artifacts and
/// `report.json` into `out`. Configuration problems are returned as errors
/// before anything is written; solver failures produce a report with
/// `error` set and exit code 3.
pub fn execute(mode: Mode, cfg: &RunConfig, out: &Path) -> Result<RunOutcome, CliError> {
    cfg.validate(mode)?;
    let v = cfg.drift.build(cfg.k)?;
    if let Some(OracleConfig::OneD { .. }) = &cfg.oracle {
        if mode == Mode::OracleCompare
            && v.is_measure_dependent()
            && !matches!(cfg.drift, DriftConfig::Vlasov { .. })
        {
            return Err(CliError::Config(
                "one_d oracle handles Vlasov kernels and measure-free drifts only".into(),
            ));
        }
    }
    std::fs::create_dir_all(out).map_err(|source| CliError::Io {
        path: out.display().to_string(),
        source,
    })?;

    let mut ctx = Ctx {
        cfg,
        out,
        report: RunReport::new(mode, cfg, cfg.seed),
        clock: Instant::now(),
    };
    let result = match mode {
        Mode::SolveLinear => solve_linear_mode(&mut ctx, &v),
        Mode::SolveNonlinear => solve_nonlinear_mode(&mut ctx, &v).map(|_| ()),
        Mode::Verify => verify_mode(&mut ctx, &v),
        Mode::Ladder => ladder_mode(&mut ctx, &v),
        Mode::Sweep => sweep_mode(&mut ctx, &v),
        Mode::OracleCompare => oracle_mode(&mut ctx, &v),
    };
    let mut report = ctx.report;
    match result {
        Ok(()) => {}
        Err(CliError::Solver(e)) => report.error = Some(e.to_string()),
        Err(other) => return Err(other),
    }
    report.pass = report.error.is_none() && report.all_asserted_pass();
    let exit_code = if report.error.is_some() {
        EXIT_SOLVER
    } else if report.pass {
        EXIT_PASS
    } else {
        EXIT_CHECK_FAILED
    };
    let path = out.join("report.json");
    let text = serde_json::to_string_pretty(&report).map_err(Error::from)?;
    std::fs::write(&path, text + "\n").map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(RunOutcome { report, exit_code })
}

fn solve_linear_mode(ctx: &mut Ctx<'_>, v: &DriftField) -> Result<(), CliError> {
    let basis = ctx.cfg.basis()?;
    let grid = ctx.cfg.grid()?;
    let p = ctx.cfg.frozen_measure(&ctx.cfg.measure, &basis)?;
    let sol = assemble(v, &p, &basis, &grid)?.solve()?;
    ctx.report.condition_estimate = Some(sol.condition_estimate);
    ctx.lap("solve");
    ctx.assess(&sol.density, v, &p, &grid, sol.system_norm)
}

fn solve_nonlinear_mode(ctx: &mut Ctx<'_>, v: &DriftField) -> Result<ChaosDensity, CliError> {
    let basis = ctx.cfg.basis()?;
    let grid = ctx.cfg.grid()?;
    let sol = match fixed_point_solve(v, &basis, &grid, &ctx.cfg.fixed_point.options()) {
        Ok(sol) => sol,
        Err(Error::NonConvergence { trace }) => {
            ctx.write("trace", "trace.csv", &trace.to_csv())?;
            ctx.report.trace = Some(TraceSummary::from(trace.as_ref()));
            return Err(Error::NonConvergence { trace }.into());
        }
        Err(e) => return Err(e.into()),
    };
    ctx.lap("solve");
    ctx.write("trace", "trace.csv", &sol.trace.to_csv())?;
    ctx.report.trace = Some(TraceSummary::from(&sol.trace));
    ctx.report.condition_estimate = Some(sol.last_linear.condition_estimate);
    let rho = sol.density;
    ctx.assess(&rho, v, &rho, &grid, sol.last_linear.system_norm)?;
    Ok(rho)
}

fn verify_mode(ctx: &mut Ctx<'_>, v: &DriftField) -> Result<(), CliError> {
    let block = ctx.cfg.verify.clone().expect("validated");
    let rho = read_density(&block.input)?;
    if rho.dim() != ctx.cfg.k {
        return Err(CliError::Config(format!(
            "{} has dimension {}, config k = {}",
            block.input.display(),
            rho.dim(),
            ctx.cfg.k
        )));
    }
    let basis = rho.basis().clone();
    let grid = QuadratureGrid::tensor(
        ctx.cfg.quadrature.max(basis.degree() as usize + 1),
        ctx.cfg.k,
    )?;
    let p = match &block.measure {
        Some(m) => ctx.cfg.frozen_measure(m, &basis)?,
        None => rho.clone(),
    };
    let system_norm = assemble(v, &p, &basis, &grid)?.norm_inf();
    ctx.lap("assemble");
    ctx.assess(&rho, v, &p, &grid, system_norm)
}

fn ladder_mode(ctx: &mut Ctx<'_>, v: &DriftField) -> Result<(), CliError> {
    let block = ctx.cfg.ladder.clone().expect("validated");
    let mut lc = LadderConfig::new(ctx.cfg.k, block.bound_c, ctx.cfg.degree, ctx.cfg.quadrature);
    if let Some(w) = block.weights {
        lc.weights = w;
    }
    if let Some(r) = block.tail_radii {
        lc.tail_radii = r;
    }
    lc.fixed_point = ctx.cfg.fixed_point.options();
    lc.validate()
        .map_err(|e| CliError::Config(format!("ladder: {e}")))?;
    let report = run_ladder(v, &lc)?;
    ctx.lap("ladder");
    for level in &report.levels {
        ctx.report.checks.push(Check::at_most(
            format!("ladder.k{}.lyapunov_moment", level.k),
            level.lyapunov_moment,
            level.bound + level.eps_quad,
        ));
        for t in &level.tail {
            ctx.report.checks.push(Check::at_most(
                format!("ladder.k{}.tail_r{}", level.k, t.radius),
                t.mass,
                t.chebyshev_bound,
            ));
        }
    }
    ctx.write(
        "ladder",
        "ladder.json",
        &serde_json::to_string_pretty(&report).map_err(Error::from)?,
    )?;
    ctx.write("ladder_table", "ladder.csv", &report.to_csv())?;
    if let Some(reason) = &report.aborted {
        ctx.report.error = Some(reason.clone());
    }
    Ok(())
}

fn sweep_mode(ctx: &mut Ctx<'_>, v: &DriftField) -> Result<(), CliError> {
    let block = ctx.cfg.sweep.clone().expect("validated");
    let basis = ctx.cfg.basis()?;
    let grid = ctx.cfg.grid()?;
    let table = sweep(
        |u| v.scaled(u),
        &block.values,
        &basis,
        &grid,
        &ctx.cfg.fixed_point.options(),
    )?;
    ctx.lap("sweep");
    for row in &table.rows {
        ctx.report.checks.push(Check {
            name: format!("sweep.u={}", row.u),
            pass: row.error.is_none(),
            value: row.final_residual.unwrap_or(f64::NAN),
            tolerance: ctx.cfg.fixed_point.tolerance,
        });
    }
    ctx.write("sweep_table", "sweep.csv", &table.to_csv())?;
    ctx.write(
        "sweep",
        "sweep.json",
        &serde_json::to_string_pretty(&table).map_err(Error::from)?,
    )?;
    Ok(())
}

fn spectral_moments(
    rho: &ChaosDensity,
    grid: &QuadratureGrid,
) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let k = rho.dim();
    let mean = (0..k)
        .map(|i| rho.integrate(|x| x[i], grid))
        .collect::<Result<Vec<_>, _>>()?;
    let mut second = Vec::with_capacity(k * k);
    for i in 0..k {
        for j in 0..k {
            second.push(rho.integrate(|x| x[i] * x[j], grid)?);
        }
    }
    Ok((mean, second))
}

fn oracle_mode(ctx: &mut Ctx<'_>, v: &DriftField) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let oracle = cfg.oracle.clone().expect("validated");
    let basis: Arc<ChaosBasis> = cfg.basis()?;
    let grid = cfg.grid()?;
    let (rho, p) = if v.is_measure_dependent() {
        let rho = solve_nonlinear_mode(ctx, v)?;
        (rho.clone(), rho)
    } else {
        let p = cfg.frozen_measure(&cfg.measure, &basis)?;
        let sol = assemble(v, &p, &basis, &grid)?.solve()?;
        ctx.report.condition_estimate = Some(sol.condition_estimate);
        ctx.lap("solve");
        ctx.assess(&sol.density, v, &p, &grid, sol.system_norm)?;
        (sol.density, p)
    };
    match oracle {
        OracleConfig::OneD {
            box_half_width,
            points,
            tolerance,
        } => {
            let density = match &cfg.drift {
                DriftConfig::Vlasov { kernel, .. } if v.is_measure_dependent() => {
                    let kernel = kernel.clone();
                    let b0 = move |z: f64| {
                        let mut o = [0.0];
                        kernel.eval(&[z], &mut o);
                        o[0]
                    };
                    oracle_vlasov_1d(b0, box_half_width, points, 1e-12, 500)?.density
                }
                _ => {
                    let frozen = v.freeze(MeasureArg::Density(&p))?;
                    oracle_1d(
                        |x| frozen.eval_v(&[x]).map_or(f64::NAN, |o| o[0]),
                        box_half_width,
                        points,
                    )?
                }
            };
            let d = density.l2_gamma_distance(|x| rho.evaluate(&[x]));
            ctx.report
                .checks
                .push(Check::at_most("oracle.one_d.l2_gamma", d, tolerance));
            ctx.write("oracle", "oracle.csv", &density.to_csv())?;
        }
        OracleConfig::Fd2d {
            box_half_width,
            mesh,
            tolerance,
        } => {
            let frozen = v.freeze(MeasureArg::Density(&p))?;
            let fd = oracle_fd_2d(&frozen, box_half_width, mesh)?;
            let phi = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
            for c in 0..2 {
                let marginal = rho.marginal(&[c])?;
                let worst = fd
                    .centers
                    .iter()
                    .zip(fd.marginal(c))
                    .map(|(&x, m)| (marginal.evaluate(&[x]) * phi(x) - m).abs())
                    .fold(0.0, f64::max);
                ctx.report.checks.push(Check::at_most(
                    format!("oracle.fd_2d.marginal{c}"),
                    worst,
                    tolerance,
                ));
            }
            ctx.write("oracle", "oracle.csv", &fd.to_csv())?;
        }
        OracleConfig::Sde {
            dt,
            steps,
            particles,
            burn_in,
            batches,
            z,
        } => {
            let opts = SdeOptions {
                dt,
                n_steps: steps,
                n_particles: particles,
                burn_in,
                batches,
                seed: cfg.seed,
                weights: Vec::new(),
            };
            let est = oracle_sde(v, MeasureArg::Density(&p), &opts)?;
            let (mean, second) = spectral_moments(&rho, &grid)?;
            let k = cfg.k;
            let mut csv = String::from("quantity,spectral,oracle,se\n");
            let mut compare = |name: String, spectral: f64, e: Estimate| {
                let exact = Estimate {
                    value: spectral,
                    se: 0.0,
                };
                csv.push_str(&format!("{name},{spectral:e},{:e},{:e}\n", e.value, e.se));
                Check {
                    pass: e.agrees_with(&exact, z),
                    value: (spectral - e.value).abs(),
                    tolerance: z * e.se,
                    name: format!("oracle.sde.{name}"),
                }
            };
            let mut checks = Vec::new();
            for (i, (&m, &e)) in mean.iter().zip(&est.mean).enumerate() {
                checks.push(compare(format!("mean{i}"), m, e));
            }
            for i in 0..k {
                for j in i..k {
                    checks.push(compare(
                        format!("second{i}{j}"),
                        second[i * k + j],
                        est.second_moment(i, j),
                    ));
                }
            }
            ctx.report.checks.extend(checks);
            ctx.write("oracle", "oracle.csv", &csv)?;
        }
    }
    ctx.lap("oracle");
    Ok(())
}
