use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use updoubling::covering::doubling_diagnostics;
use updoubling::dominating::{kernel_log_bound_check, verify_upper_doubling, AxiomCheck};
use updoubling::john_nirenberg::{lp_check, lp_oscillation, verify_jn, LpCheck};
use updoubling::operators::{maximal_function, weak_type_check};
use updoubling::rbmo::{build_problem, check_ball_bounds, compare_rho, solve_rbmo, NeighbourParams};
use updoubling::{Ball, CanonicalBallFamily, Space, SpaceDocument};

use crate::config::{linspace, RunConfig};

/// What a command concluded about the checks it ran.
pub enum Verdict {
    Pass,
    Fail(String),
}

impl Verdict {
    fn first_failure(checks: impl IntoIterator<Item = (bool, String)>) -> Self {
        checks
            .into_iter()
            .find(|(ok, _)| !ok)
            .map_or(Verdict::Pass, |(_, why)| Verdict::Fail(why))
    }
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(dir, name, &text)
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    Ok(BufWriter::new(
        File::create(&path).with_context(|| format!("writing {}", path.display()))?,
    ))
}

fn describe(space: &Space, ball: &Ball) -> String {
    format!("B({}, {})", space.name(ball.center), ball.radius)
}

fn axiom_failure(space: &Space, name: &str, check: &AxiomCheck) -> (bool, String) {
    let at = check.witness.map(|b| describe(space, &b)).unwrap_or_default();
    (
        check.passed,
        format!("lambda {name} fails at {at} (ratio {})", check.worst_ratio),
    )
}

#[derive(Serialize)]
struct KernelSweep {
    pairs: usize,
    passed: bool,
    /// Largest `(K - 1) / bound`.
    worst_ratio: f64,
    witness: Option<(Ball, Ball)>,
}

fn kernel_sweep(space: &Space, lambda: &updoubling::dominating::DominatingFunction) -> Result<KernelSweep> {
    let family = CanonicalBallFamily::new(space);
    let members: Vec<_> = (0..family.len()).map(|i| family.members(space, i)).collect();
    let mut sweep = KernelSweep {
        pairs: 0,
        passed: true,
        worst_ratio: 0.0,
        witness: None,
    };
    for (i, b) in family.balls().iter().enumerate() {
        for (j, b1) in family.balls().iter().enumerate() {
            if i == j || b.radius > b1.radius || !members[i].is_subset(&members[j]) {
                continue;
            }
            let check = kernel_log_bound_check(space, lambda, b, b1)?;
            let ratio = (check.kernel - 1.0) / check.bound;
            sweep.pairs += 1;
            if sweep.passed && (!check.passed || ratio > sweep.worst_ratio) {
                sweep.witness = Some((*b, *b1));
            }
            sweep.worst_ratio = sweep.worst_ratio.max(ratio);
            sweep.passed &= check.passed;
        }
    }
    Ok(sweep)
}

pub fn analyze(config: &RunConfig) -> Result<Verdict> {
    let space = config.load_space()?;
    let lambda = config.lambda(&space)?;
    let out = config.out_dir()?;
    let diag = doubling_diagnostics(&space);
    write_json(&out, "diagnostics.json", &diag)?;
    let report = verify_upper_doubling(&space, &lambda);
    write_json(&out, "lambda.json", &report)?;
    let sweep = kernel_sweep(&space, &lambda)?;
    write_json(&out, "kernel_sweep.json", &sweep)?;

    println!("points            {}", space.len());
    println!("C_mu              {}", diag.c_mu);
    println!("doubling exponent {}", diag.n_exponent);
    println!("lambda            {} (C_lambda = {})", report.variant, report.c_lambda);
    println!("lambda axioms     {}", if report.passed() { "pass" } else { "FAIL" });
    println!(
        "kernel bound      {} over {} pairs, worst ratio {:.4}",
        if sweep.passed { "pass" } else { "FAIL" },
        sweep.pairs,
        sweep.worst_ratio
    );
    let kernel_at = sweep
        .witness
        .map(|(b, b1)| format!("{} in {}", describe(&space, &b), describe(&space, &b1)))
        .unwrap_or_default();
    Ok(Verdict::first_failure([
        axiom_failure(&space, "monotonicity", &report.monotone),
        axiom_failure(&space, "doubling", &report.doubling),
        axiom_failure(&space, "domination", &report.domination),
        axiom_failure(&space, "off-centre domination", &report.off_center),
        (sweep.passed, format!("kernel log bound fails for {kernel_at}")),
    ]))
}

pub fn rbmo(config: &RunConfig) -> Result<Verdict> {
    let space = config.load_space()?;
    config.check_scale(&space)?;
    let lambda = config.lambda(&space)?;
    let f = config.function(&space)?;
    let rho = config.rho();
    let diag = doubling_diagnostics(&space);
    let params = config.params(&lambda, diag.n_exponent)?;
    let out = config.out_dir()?;

    let problem = build_problem(&space, &lambda, &f, rho)?;
    let family = solve_rbmo(&problem)?;
    let certificate = problem.certify(&family);
    write_text(&out, "family.json", &(family.to_json(&space) + "\n"))?;
    problem.write_slack_csv(&family, create(&out, "slacks.csv")?)?;

    // The comparison bounds need constants solved with inflation alpha.
    let at_alpha = if (params.alpha - rho).abs() <= 1e-12 * rho {
        family.clone()
    } else {
        solve_rbmo(&build_problem(&space, &lambda, &f, params.alpha)?)?
    };
    let bounds = check_ball_bounds(&space, &lambda, &f, &at_alpha, &params, NeighbourParams::default())?;
    write_json(&out, "ball_bounds.json", &bounds)?;

    println!("A                 {}", family.a);
    println!("lower bound       {}", family.lower_bound);
    println!("balls             {}", family.balls.len());
    println!(
        "certificate       {} ({} constraints, min slack {:e})",
        if certificate.passed { "pass" } else { "FAIL" },
        certificate.constraints,
        certificate.min_slack
    );
    println!(
        "ball comparisons  {} (alpha = {}, beta = {})",
        if bounds.passed() { "pass" } else { "FAIL" },
        params.alpha,
        params.beta
    );
    let mut checks = vec![
        (
            certificate.passed,
            format!("admissibility certificate fails: {:?}", certificate.worst),
        ),
        (
            bounds.ancestor_drift.passed,
            witness("ancestor drift", &space, bounds.ancestor_drift.witness),
        ),
        (
            bounds.ancestor_kernel.passed,
            witness("ancestor kernel", &space, bounds.ancestor_kernel.witness),
        ),
        (
            bounds.neighbour_drift.passed,
            witness("neighbour drift", &space, bounds.neighbour_drift.witness),
        ),
        (
            bounds.average_vs_constant.passed,
            witness("average vs constant", &space, bounds.average_vs_constant.witness),
        ),
    ];
    if let Some(sigma) = config.sigma {
        let cmp = compare_rho(&space, &lambda, &f, rho, sigma)?;
        write_json(&out, "rho_comparison.json", &cmp)?;
        println!(
            "rho comparison    {} (A_sigma / A_rho = {}, C = {})",
            if cmp.passed() { "pass" } else { "FAIL" },
            cmp.ratio,
            cmp.constant
        );
        checks.push((cmp.passed(), format!("rho comparison fails: {cmp:?}")));
    }
    Ok(Verdict::first_failure(checks))
}

fn witness(name: &str, space: &Space, pair: Option<(Ball, Ball)>) -> String {
    match pair {
        Some((a, b)) => format!(
            "{name} bound fails at {} and {}",
            describe(space, &a),
            describe(space, &b)
        ),
        None => format!("{name} bound fails"),
    }
}

#[derive(Serialize)]
struct LpReport {
    checks: Vec<LpCheck>,
}

pub fn jn(config: &RunConfig) -> Result<Verdict> {
    let space = config.load_space()?;
    config.check_scale(&space)?;
    let lambda = config.lambda(&space)?;
    let f = config.function(&space)?;
    let rho = config.rho();
    let diag = doubling_diagnostics(&space);
    let params = config.params(&lambda, diag.n_exponent)?;
    let b0 = config.ball(&space)?;
    let out = config.out_dir()?;

    let family = solve_rbmo(&build_problem(&space, &lambda, &f, rho)?)?;
    let grid = match config.t_grid()? {
        Some(grid) => grid,
        None => {
            let c0 = family.value_of(&space, &b0);
            let members = space.open_members(b0.center, b0.radius);
            let top = members.ones().map(|y| (f[y] - c0).abs()).fold(0.0, f64::max);
            linspace(0.0, 1.05 * top, 41)
        }
    };
    let report = verify_jn(&space, &f, &family, &b0, rho, &params, &grid)?;
    write_json(&out, "jn.json", &report)?;
    report.write_tail_csv(create(&out, "tail.csv")?)?;
    write_text(&out, "tail.gp", GNUPLOT)?;
    let mut lp = LpReport { checks: Vec::new() };
    for p in [1.0, 2.0, 4.0] {
        let value = lp_oscillation(&space, &f, &family, &b0, p, rho)?;
        lp.checks.push(lp_check(value, p, family.a, report.l));
    }
    write_json(&out, "lp.json", &lp)?;

    println!("B0                {}", describe(&space, &b0));
    println!("A                 {}", report.a);
    println!("L                 {} (L/A = {})", report.l, report.search.ratio);
    println!("depths            {}", report.levels.len() - 1);
    println!("c_fit             {}", report.c_fit);
    println!("c_proof           {}", report.c_proof);
    println!("decomposition     {}", if report.passed() { "pass" } else { "FAIL" });
    let search_witness = report
        .search
        .trace
        .last()
        .map(|s| format!("L = {}: {}", s.l, s.outcome))
        .unwrap_or_default();
    let level_failure = report.levels.iter().find(|l| !(l.halving && l.bound_ok));
    let dyadic_failure = report.dyadic.iter().find(|d| !d.passed);
    let mut checks = vec![
        (
            !report.search.cap_hit,
            format!("no working threshold found; last attempt {search_witness}"),
        ),
        (
            level_failure.is_none(),
            format!("mass does not halve at depth {:?}", level_failure.map(|l| l.depth)),
        ),
        (
            report.nodes.iter().flatten().all(|d| d.passed()),
            "a stopping family violates its checks".to_string(),
        ),
        (
            dyadic_failure.is_none(),
            format!("dyadic tail bound fails: {dyadic_failure:?}"),
        ),
        (
            report.c_fit_ok,
            format!("fitted rate {} is below {}", report.c_fit, report.c_proof),
        ),
    ];
    for check in &lp.checks {
        checks.push((check.passed, format!("L^p bound fails: {check:?}")));
    }
    Ok(Verdict::first_failure(checks))
}

const GNUPLOT: &str = "\
set datafile separator ','
set key top right
set xlabel 't'
set ylabel 'measure'
set logscale y
plot 'tail.csv' using 1:2 skip 1 with steps title 'tail', \\
     'tail.csv' using 1:3 skip 1 with lines title 'envelope'
";

#[derive(Serialize)]
struct MaximalOutput<'a> {
    points: &'a [String],
    values: &'a [f64],
    weak_type: updoubling::operators::WeakTypeReport,
}

pub fn maximal(config: &RunConfig) -> Result<Verdict> {
    let space = config.load_space()?;
    let f = config.function(&space)?;
    let out = config.out_dir()?;
    let profile = maximal_function(&space, &f, None)?;
    let grid = match config.t_grid()? {
        Some(grid) => grid,
        None => {
            let top = profile.values.iter().copied().fold(0.0, f64::max);
            (1..=20).map(|k| top * k as f64 / 21.0).collect()
        }
    };
    let weak_type = weak_type_check(&space, &f, &grid)?;
    let passed = weak_type.passed;
    let detail = format!("weak (1,1) bound fails at t = {:?}", weak_type.witness_t);
    println!("levels            {}", weak_type.rows.len());
    println!("tightest ratio    {}", weak_type.tightest_ratio);
    println!("weak (1,1)        {}", if passed { "pass" } else { "FAIL" });
    write_json(
        &out,
        "maximal.json",
        &MaximalOutput {
            points: space.names(),
            values: &profile.values,
            weak_type,
        },
    )?;
    Ok(Verdict::first_failure([(passed, detail)]))
}

pub fn generate(config: &RunConfig) -> Result<Verdict> {
    anyhow::ensure!(config.generate.is_some(), "generate needs --generate SPEC");
    let space = config.load_space()?;
    let out = config.out_dir()?;
    write_text(
        &out,
        "space.json",
        &(SpaceDocument::from_space(&space).to_json() + "\n"),
    )?;
    CanonicalBallFamily::new(&space).write_csv(&space, create(&out, "balls.csv")?)?;
    println!("wrote {} points to {}", space.len(), out.join("space.json").display());
    Ok(Verdict::Pass)
}
