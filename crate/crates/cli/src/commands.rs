//! Subcommand implementations. Each returns the process exit code.

use std::fs;
use std::path::{Path, PathBuf};

use lurepwa::linalg::Vector;
use lurepwa::ode::OdeOptions;
use lurepwa::solve::{approximation_for, Outcome, CHECK_TOLERANCE};
use lurepwa::verify::{check_decrease, sample_certificate, simulate_pair, TrajectoryPair};
use lurepwa::{
    augment, check_certificate, hinf_channel_gain, to_pwa_lure, verify_error_lipschitz,
    AugmentedSystem, Certificate, LureSystem,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::artifacts::*;
use crate::schema::SystemDescription;
use crate::{CliError, GlobalArgs, SimulateArgs, EXIT_NOT_CERTIFIED, EXIT_OK, EXIT_SOLVER};

/// Grid for the empirical error-slope check in `approx`.
const SLOPE_GRID: usize = 100_000;

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(dir: &Path, file: &str, contents: &str) -> Result<PathBuf, CliError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| CliError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let path = dir.join(file);
    fs::write(&path, contents).map_err(io(&path))?;
    Ok(path)
}

/// Reads a description and applies command-line overrides.
pub fn load_description(path: &Path, g: &GlobalArgs) -> Result<SystemDescription, CliError> {
    let mut desc = SystemDescription::from_json(&read(path)?)?;
    if let Some(eta) = g.eta_ref {
        desc.eta_ref = eta;
    }
    if let Some(n) = g.force_n {
        desc.solver.force_regions = Some(n);
    }
    if let Some(seed) = g.seed {
        desc.validation.seed = seed;
    }
    if let Some(b) = &g.backend {
        desc.solver.backend = b.clone();
    }
    Ok(desc)
}

pub fn approx(input: &Path, g: &GlobalArgs) -> Result<i32, CliError> {
    let desc = load_description(input, g)?;
    let sys = desc.system()?;
    let approx = approximation_for(&sys, &desc.certify_options())?;
    let slope = verify_error_lipschitz(&sys.nl, &approx, SLOPE_GRID)?;
    let artifact = ApproximationArtifact {
        schema: APPROXIMATION_SCHEMA.into(),
        system: desc.name.clone(),
        eta_ref: desc.eta_ref,
        approximation: (&approx).into(),
        max_error_slope: slope,
        table: ApproxTable::sample(&sys.nl, &approx, TABLE_POINTS),
    };
    let path = write(
        &g.out_dir,
        &format!("{}.approximation.json", desc.stem()),
        &artifact.to_json(),
    )?;
    println!(
        "{}: N = {}, eta = {} (eta_ref {}), wrote {}",
        desc.name,
        approx.regions(),
        approx.eta,
        desc.eta_ref,
        path.display()
    );
    Ok(EXIT_OK)
}

fn exit_code(outcome: Outcome) -> i32 {
    match outcome {
        Outcome::Certified => EXIT_OK,
        Outcome::NotCertified => EXIT_NOT_CERTIFIED,
        Outcome::SolverFailure => EXIT_SOLVER,
    }
}

/// Sector [r − η, r + η] of a single-region run and its small-gain number.
fn sector_oracle(sys: &LureSystem, slope: f64, eta: f64) -> SectorOracle {
    let gain = hinf_channel_gain(sys, slope).unwrap_or(f64::INFINITY);
    SectorOracle {
        sector: [slope - eta, slope + eta],
        channel_gain: gain,
        loop_gain: gain * eta,
    }
}

pub fn certify(input: &Path, g: &GlobalArgs) -> Result<i32, CliError> {
    let desc = load_description(input, g)?;
    let sys = desc.system()?;
    let mut opts = desc.certify_options();
    opts.solver = opts.solver.with_env_overrides()?;
    if let Some(tol) = g.tol {
        opts.solver.feasibility_tolerance = tol;
        opts.solver.validate()?;
    }
    let result = lurepwa::certify(&sys, &opts)?;
    let code = exit_code(result.outcome);
    let stem = desc.stem();
    let mut report = ReportArtifact::new(&desc.name, desc.eta_ref, &result, code);
    if result.regions() == 1 {
        report.sector_oracle = Some(sector_oracle(&sys, result.approx.slopes[0], result.eta()));
    }
    if let (Outcome::Certified, Some(cert)) = (result.outcome, &result.certificate) {
        let artifact = CertificateArtifact {
            schema: CERTIFICATE_SCHEMA.into(),
            system: desc.clone(),
            approximation: (&result.approx).into(),
            certificate: cert.into(),
        };
        let file = format!("{stem}.certificate.json");
        write(&g.out_dir, &file, &artifact.to_json())?;
        report.certificate_file = Some(file);
    }
    let path = write(
        &g.out_dir,
        &format!("{stem}.report.json"),
        &report.to_json(),
    )?;
    println!(
        "{}: {} (N = {}, eta = {}, {:.3} s) — {}; wrote {}",
        desc.name,
        report.outcome,
        result.regions(),
        result.eta(),
        report.wall_time_s,
        result.detail,
        path.display()
    );
    Ok(code)
}

/// Certificate artifact together with the rebuilt augmented system.
pub struct LoadedCertificate {
    pub artifact: CertificateArtifact,
    pub system: LureSystem,
    pub aug: AugmentedSystem,
    pub certificate: Certificate,
}

pub fn load_certificate(path: &Path) -> Result<LoadedCertificate, CliError> {
    let artifact = CertificateArtifact::from_json(&read(path)?)?;
    let system = artifact.system.system()?;
    let approx = artifact.approximation.to_approximation()?;
    let aug = augment(&to_pwa_lure(&system, &approx)?);
    let certificate = artifact.certificate.to_certificate()?;
    if certificate.regions() != approx.regions() || certificate.couplings.len() != aug.facets.len()
    {
        return Err(CliError::schema(format!(
            "certificate does not match its approximation ({} regions, {} facets)",
            approx.regions(),
            aug.facets.len()
        )));
    }
    Ok(LoadedCertificate {
        artifact,
        system,
        aug,
        certificate,
    })
}

pub fn check(path: &Path, samples: Option<usize>, g: &GlobalArgs) -> Result<i32, CliError> {
    let loaded = load_certificate(path)?;
    let desc = &loaded.artifact.system;
    let tol = g.tol.unwrap_or(CHECK_TOLERANCE);
    let seed = g.seed.unwrap_or(desc.validation.seed);
    let report = check_certificate(&loaded.certificate, &loaded.aug, tol);
    let per_cell = samples.unwrap_or(desc.validation.samples_per_cell);
    let sampling = (per_cell > 0).then(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        SampleData::new(
            per_cell,
            &sample_certificate(&loaded.certificate, &loaded.aug, per_cell, &mut rng),
        )
    });
    let artifact = CheckArtifact {
        schema: CHECK_SCHEMA.into(),
        system: desc.name.clone(),
        passed: report.passed,
        check: (&report).into(),
        sampling,
        seed,
    };
    let out = write(
        &g.out_dir,
        &format!("{}.check.json", desc.stem()),
        &artifact.to_json(),
    )?;
    println!(
        "{}: certificate {} (max residual {:e} at {}, tol {:e}); wrote {}",
        desc.name,
        if report.passed {
            "accepted"
        } else {
            "rejected"
        },
        report.max_residual,
        report.worst,
        tol,
        out.display()
    );
    Ok(if report.passed {
        EXIT_OK
    } else {
        EXIT_NOT_CERTIFIED
    })
}

fn state(v: &[f64], n: usize, what: &str) -> Result<Vector, CliError> {
    if v.len() != n {
        return Err(CliError::schema(format!(
            "{what} has {} entries, the system has {n} states",
            v.len()
        )));
    }
    Ok(Vector::from_column_slice(v))
}

pub fn simulate(args: &SimulateArgs, g: &GlobalArgs) -> Result<i32, CliError> {
    let desc = load_description(&args.input, g)?;
    let sys = desc.system()?;
    let n = sys.n();
    let loaded = args
        .certificate
        .as_deref()
        .map(load_certificate)
        .transpose()?;
    let cert = loaded.as_ref().map(|l| (&l.certificate, &l.aug));
    let horizon = args.horizon.unwrap_or(desc.validation.horizon);
    let tol = g.tol.unwrap_or(desc.validation.decrease_tol);
    let ode = OdeOptions::default();
    let stem = desc.stem();

    let evaluate = |pair: &TrajectoryPair| -> Result<PairResult, CliError> {
        let decrease = match cert {
            Some((c, _)) => Some(check_decrease(c, pair, tol)?),
            None => None,
        };
        Ok(PairResult {
            x0: pair.x[0].iter().copied().collect(),
            x0_tilde: pair.x_tilde[0].iter().copied().collect(),
            ratio: pair.contraction_ratio(),
            decrease_passed: decrease.as_ref().map(|d| d.passed),
            max_increase: decrease.as_ref().map(|d| d.max_increase),
            max_envelope_excess: decrease.as_ref().map(|d| d.max_envelope_excess),
        })
    };

    let results = match args.pairs {
        None => {
            let x0 = state(args.x0.as_deref().unwrap_or(&vec![1.0; n]), n, "--x0")?;
            let xt0 = state(args.xt0.as_deref().unwrap_or(&vec![-1.0; n]), n, "--xt0")?;
            let pair = simulate_pair(&sys, &x0, &xt0, horizon, &ode, cert)?;
            let mut csv = Vec::new();
            pair.write_csv(&mut csv).expect("writing to memory");
            let path = write(
                &g.out_dir,
                &format!("{stem}.trajectory.csv"),
                &String::from_utf8(csv).expect("ascii csv"),
            )?;
            let result = evaluate(&pair)?;
            println!(
                "{}: |dx(T)|/|dx(0)| = {:e} at T = {horizon}{}; wrote {}",
                desc.name,
                result.ratio,
                match result.decrease_passed {
                    Some(true) => ", V decrease ok",
                    Some(false) => ", V decrease VIOLATED",
                    None => "",
                },
                path.display()
            );
            vec![result]
        }
        Some(count) => {
            let seed = desc.validation.seed;
            let scale = desc.validation.region_scale;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut draw = || Vector::from_fn(n, |_, _| rng.gen_range(-scale..=scale));
            let mut results = Vec::with_capacity(count);
            for _ in 0..count {
                let (x0, xt0) = (draw(), draw());
                results.push(evaluate(&simulate_pair(
                    &sys, &x0, &xt0, horizon, &ode, cert,
                )?)?);
            }
            let all_passed = cert.map(|_| results.iter().all(|r| r.decrease_passed == Some(true)));
            let artifact = PairsArtifact {
                schema: PAIRS_SCHEMA.into(),
                system: desc.name.clone(),
                seed,
                horizon,
                tolerance: tol,
                max_ratio: results.iter().map(|r| r.ratio).fold(0.0, f64::max),
                all_passed,
                pairs: results.clone(),
            };
            let path = write(
                &g.out_dir,
                &format!("{stem}.pairs.json"),
                &artifact.to_json(),
            )?;
            println!(
                "{}: {count} pairs, max |dx(T)|/|dx(0)| = {:e}{}; wrote {}",
                desc.name,
                artifact.max_ratio,
                match all_passed {
                    Some(true) => ", all V decrease checks ok",
                    Some(false) => ", V decrease VIOLATED",
                    None => "",
                },
                path.display()
            );
            results
        }
    };
    let failed = results.iter().any(|r| r.decrease_passed == Some(false));
    Ok(if failed { EXIT_NOT_CERTIFIED } else { EXIT_OK })
}

pub fn report(path: &Path) -> Result<i32, CliError> {
    let text = read(path)?;
    let schema = serde_json::from_str::<serde_json::Value>(&text)
        .map_err(|e| CliError::schema(format!("not JSON: {e}")))?
        .get("schema")
        .and_then(|s| s.as_str())
        .map(str::to_string)
        .ok_or_else(|| CliError::schema("artifact has no schema tag"))?;
    let summary = match schema.as_str() {
        REPORT_SCHEMA => render_report(&ReportArtifact::from_json(&text)?),
        CERTIFICATE_SCHEMA => render_certificate(&CertificateArtifact::from_json(&text)?),
        CHECK_SCHEMA => render_check(&CheckArtifact::from_json(&text)?),
        APPROXIMATION_SCHEMA => render_approx(&ApproximationArtifact::from_json(&text)?),
        PAIRS_SCHEMA => render_pairs(&PairsArtifact::from_json(&text)?),
        other => {
            return Err(CliError::schema(format!(
                "unknown artifact schema `{other}`"
            )))
        }
    };
    print!("{summary}");
    Ok(EXIT_OK)
}

fn render_approx_data(a: &ApproxData) -> String {
    format!(
        "regions      {}\neta          {}\nbreakpoints  {:?}\nslopes       {:?}\n",
        a.regions, a.eta, a.breakpoints, a.slopes
    )
}

pub fn render_report(r: &ReportArtifact) -> String {
    let c = &r.census;
    let mut s = format!(
        "system       {}\noutcome      {} (exit {})\n",
        r.system, r.outcome, r.exit_code
    );
    s += &format!("eta_ref      {}\n", r.eta_ref);
    s += &render_approx_data(&r.approximation);
    s += &format!(
        "census       {} cells, {} free entries, {} LMI blocks, {} equalities, {} inequalities\n",
        c.cells, c.free_entries, c.lmi_blocks, c.equality_rows, c.inequality_rows
    );
    s += &format!(
        "variables    P {}, Pbar {}, multipliers {}, couplings {}, scalars {}\n",
        c.p_vars, c.pbar_vars, c.multiplier_vars, c.coupling_vars, c.scalar_vars
    );
    if let Some([s1, s2, s3]) = r.sigma {
        s += &format!("sigma        {s1:e} {s2:e} {s3:e}\n");
    }
    if let Some(ch) = &r.check {
        s += &format!(
            "check        {} (max residual {:e} at {}, tol {:e})\n",
            if ch.passed { "passed" } else { "failed" },
            ch.max_residual,
            ch.worst,
            ch.tolerance
        );
    }
    if let Some(o) = &r.sector_oracle {
        s += &format!(
            "sector       [{}, {}], channel gain {:.6}, loop gain {:.6}\n",
            o.sector[0], o.sector[1], o.channel_gain, o.loop_gain
        );
    }
    s += &format!(
        "solver       {}\ndetail       {}\ntime         {:.3} s\n",
        r.solver_status, r.detail, r.wall_time_s
    );
    if let Some(f) = &r.certificate_file {
        s += &format!("certificate  {f}\n");
    }
    s
}

fn render_certificate(c: &CertificateArtifact) -> String {
    let d = &c.certificate;
    let mut s = format!("system       {}\n", c.system.name);
    s += &render_approx_data(&c.approximation);
    s += &format!(
        "certificate  {} diagonal, {} off-diagonal cells, {} facets\nsigma        {:e} {:e} {:e}\nsolver       {} (residual {:e})\n",
        d.p.len(),
        d.cells.len(),
        d.couplings.len(),
        d.sigma[0],
        d.sigma[1],
        d.sigma[2],
        d.solver_status,
        d.max_residual
    );
    s
}

fn render_check(c: &CheckArtifact) -> String {
    let mut s = format!(
        "system       {}\ncheck        {} (max residual {:e} at {}, tol {:e})\n",
        c.system,
        if c.passed { "accepted" } else { "rejected" },
        c.check.max_residual,
        c.check.worst,
        c.check.tolerance
    );
    for item in c
        .check
        .items
        .iter()
        .filter(|i| i.residual > c.check.tolerance)
    {
        s += &format!("  failing    {} {:e}\n", item.name, item.residual);
    }
    if let Some(sm) = &c.sampling {
        s += &format!(
            "sampling     {} samples, max bound violation {:e}, max facet jump {:e} (seed {})\n",
            sm.samples, sm.max_bound_violation, sm.max_facet_jump, c.seed
        );
    }
    s
}

fn render_approx(a: &ApproximationArtifact) -> String {
    format!(
        "system       {}\neta_ref      {}\n{}max |eps'|   {}\ntable        {} points\n",
        a.system,
        a.eta_ref,
        render_approx_data(&a.approximation),
        a.max_error_slope,
        a.table.q.len()
    )
}

fn render_pairs(p: &PairsArtifact) -> String {
    format!(
        "system       {}\npairs        {} (seed {}, T = {})\nmax ratio    {:e}\ndecrease     {}\n",
        p.system,
        p.pairs.len(),
        p.seed,
        p.horizon,
        p.max_ratio,
        match p.all_passed {
            Some(true) => "all passed",
            Some(false) => "violated",
            None => "not checked (no certificate)",
        }
    )
}
