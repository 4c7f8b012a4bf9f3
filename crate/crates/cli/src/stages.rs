//! One function per subcommand. Each returns a JSON summary, the checks it
//! gates on and the data files it produced.

use rayon::prelude::*;
use rwl_core::dyadic::Direction;
use rwl_core::estimates::{
    coercivity_check, interp_ratio, scan_predecessor, scan_semenov, scan_t_ell, InterpConfig, Projector, ScanReport,
};
use rwl_core::filters::FilterTable;
use rwl_core::grid::{make_grid, DiscreteField, TorusGrid};
use rwl_core::haar::{haar_coefficients, haar_reconstruct, square_function};
use rwl_core::multipliers::{
    partial_derivative, riesz, riesz_inverse, sectional_integral, CalderonPair,
};
use rwl_core::suite::{standard_suite, SuiteSpec, TestFunction};
use rwl_core::wavelet::{
    auxiliary_system, build_wavelet_system, riesz_identity_check, t_ell, t_ell_m, verify_admissibility,
    wavelet_projection, WaveletSystem,
};
use rwl_core::{Error, Result};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, Resolved};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    VerifyAdmissible,
    Decompose,
    ScanTell,
    ScanSemenov,
    ScanPredecessor,
    InterpCheck,
    Coercivity,
    IdentityCheck,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::VerifyAdmissible,
        Stage::IdentityCheck,
        Stage::Decompose,
        Stage::ScanTell,
        Stage::ScanSemenov,
        Stage::ScanPredecessor,
        Stage::InterpCheck,
        Stage::Coercivity,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Stage::VerifyAdmissible => "verify-admissible",
            Stage::Decompose => "decompose",
            Stage::ScanTell => "scan-tell",
            Stage::ScanSemenov => "scan-semenov",
            Stage::ScanPredecessor => "scan-predecessor",
            Stage::InterpCheck => "interp-check",
            Stage::Coercivity => "coercivity",
            Stage::IdentityCheck => "identity-check",
        }
    }
}

/// A measured quantity compared against a bound (`value <= bound`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self { name: name.into(), value, bound, pass: value <= bound }
    }

    /// `|b / a - 1| <= tol`, for refinement stability.
    pub fn stable(name: impl Into<String>, a: f64, b: f64, tol: f64) -> Self {
        let change = if a > 0.0 && b.is_finite() { (b / a - 1.0).abs() } else { f64::INFINITY };
        Self::at_most(name, change, tol)
    }
}

#[derive(Debug, Clone)]
pub struct StageOutput {
    pub stage: Stage,
    pub summary: Value,
    pub checks: Vec<Check>,
    pub files: Vec<(String, Vec<u8>)>,
}

impl StageOutput {
    fn new(stage: Stage) -> Self {
        Self { stage, summary: json!({}), checks: Vec::new(), files: Vec::new() }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Shared inputs for the stages.
pub struct Context {
    pub cfg: ExperimentConfig,
    pub res: Resolved,
}

impl Context {
    pub fn new(cfg: ExperimentConfig, res: Resolved) -> Self {
        Self { cfg, res }
    }

    fn grid(&self, depth: u32) -> Result<TorusGrid> {
        make_grid(self.cfg.n, depth)
    }

    fn system(&self, depth: u32) -> Result<WaveletSystem> {
        Ok(build_wavelet_system(&self.cfg.filter, self.grid(depth)?, &Direction::all(self.cfg.n))?.with_delta(self.cfg.delta))
    }

    /// Depths used by refinement checks.
    fn depths(&self) -> Vec<u32> {
        if self.cfg.refine {
            vec![self.cfg.depth, self.cfg.depth + 1]
        } else {
            vec![self.cfg.depth]
        }
    }

    fn suite(&self, sys: &WaveletSystem, spec: &SuiteSpec) -> Result<Vec<TestFunction>> {
        standard_suite(sys, spec, self.res.i0, self.cfg.seed)
    }

    fn band_limited(&self, sys: &WaveletSystem, count: usize) -> Result<Vec<DiscreteField>> {
        let spec = SuiteSpec { random: count, atoms: 0, packets: 0, preimages: 0, radius: self.cfg.suite.radius };
        Ok(self.suite(sys, &spec)?.into_iter().map(|f| f.field).collect())
    }
}

pub fn run_stage(ctx: &Context, stage: Stage) -> Result<StageOutput> {
    match stage {
        Stage::VerifyAdmissible => verify_admissible(ctx),
        Stage::Decompose => decompose(ctx),
        Stage::ScanTell => scan_tell(ctx),
        Stage::ScanSemenov => semenov(ctx),
        Stage::ScanPredecessor => predecessor(ctx),
        Stage::InterpCheck => interp_check(ctx),
        Stage::Coercivity => coercivity(ctx),
        Stage::IdentityCheck => identity_check(ctx),
    }
}

fn to_json<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report serializes")
}

fn csv(report: &ScanReport) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    report.write_csv(&mut buf)?;
    Ok(buf)
}

fn p_tag(p: f64) -> String {
    format!("{p:.2}").replace('.', "_")
}

fn verify_admissible(ctx: &Context) -> Result<StageOutput> {
    let sys = ctx.system(ctx.cfg.depth)?;
    let report = verify_admissibility(&sys, ctx.cfg.delta, ctx.res.alpha, ctx.cfg.seed)?;
    let mut out = StageOutput::new(Stage::VerifyAdmissible);
    out.summary = to_json(&report);
    out.files.push(("admissibility.json".into(), serde_json::to_vec_pretty(&report).expect("serializes")));
    Ok(out)
}

fn decompose(ctx: &Context) -> Result<StageOutput> {
    let sys = ctx.system(ctx.cfg.depth)?;
    let grid = sys.grid();
    let pair = CalderonPair::new(grid)?;
    let eps = ctx.res.eps;
    let fields = ctx.band_limited(&sys, ctx.cfg.suite.random.clamp(1, 3))?;
    let (m_lo, m_hi) = pair.scale_range();

    let mut partition = 0.0f64;
    for (p, k) in grid.frequencies().iter().enumerate() {
        if k[..grid.dim()].iter().all(|&x| x == 0) {
            continue;
        }
        let mut sum = 0.0;
        for m in m_lo..=m_hi {
            sum += pair.table(m)?[p];
        }
        let zeta: Vec<f64> = k[..grid.dim()].iter().map(|&x| x as f64).collect();
        partition = partition.max((sum - 1.0).abs()).max((pair.partition_sum(&zeta) - 1.0).abs());
    }

    let (lo, hi) = sys.ell_range(&pair);
    let aux = auxiliary_system(&FilterTable::default(), grid, None)?;
    let mut rows = String::from("field,ell,l2_norm\n");
    let (mut recon_w, mut recon_h, mut lp_sum, mut lm_sum) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for (i, u) in fields.iter().enumerate() {
        recon_w = recon_w.max(sys.synthesize(&sys.analyze(u)).relative_l2_distance(u));
        recon_h = recon_h.max(haar_reconstruct(&haar_coefficients(u)).relative_l2_distance(u));
        let pieces: Vec<DiscreteField> = (lo..=hi)
            .into_par_iter()
            .map(|ell| t_ell(&sys, &pair, u, ell, &eps))
            .collect::<Result<_>>()?;
        let mut sum = DiscreteField::zeros(grid);
        for (ell, piece) in (lo..=hi).zip(&pieces) {
            rows.push_str(&format!("{i},{ell},{:e}\n", piece.l2_norm()));
            sum = sum.add(piece);
        }
        // measured against |u|: single pieces can vanish to rounding level
        let scale = u.l2_norm();
        lp_sum = lp_sum.max(sum.sub(&wavelet_projection(&sys, u, &eps)?).l2_norm() / scale);
        for &ell in &ctx.cfg.identity_ells {
            let Ok((ml, mh)) = sys.ell_m_range(&pair, ell) else { continue };
            let parts: Vec<DiscreteField> = (ml..=mh)
                .into_par_iter()
                .map(|m| t_ell_m(&sys, &aux, &pair, u, ell, m, &eps))
                .collect::<Result<_>>()?;
            let mut total = DiscreteField::zeros(grid);
            for piece in &parts {
                total = total.add(piece);
            }
            let t = &pieces[(ell - lo) as usize];
            lm_sum = lm_sum.max(total.sub(t).l2_norm() / scale);
        }
    }

    let mut coefficients = Vec::new();
    sys.analyze(&fields[0]).write_csv(&mut coefficients).map_err(|e| Error::Format(e.to_string()))?;

    let mut out = StageOutput::new(Stage::Decompose);
    out.summary = json!({
        "fields": fields.len(),
        "ell_range": [lo, hi],
        "calderon_scales": [m_lo, m_hi],
        "partition_error": partition,
        "wavelet_reconstruction": recon_w,
        "haar_reconstruction": recon_h,
        "littlewood_paley_sum": lp_sum,
        "t_ell_m_sum": lm_sum,
    });
    out.checks = vec![
        Check::at_most("calderon partition of unity", partition, 1e-10),
        Check::at_most("wavelet reconstruction", recon_w, 1e-8),
        Check::at_most("haar reconstruction", recon_h, 1e-8),
        Check::at_most("sum of T_l equals W", lp_sum, 1e-7),
        Check::at_most("sum of T_l,m equals T_l", lm_sum, 1e-7),
    ];
    out.files.push(("decompose.csv".into(), rows.into_bytes()));
    out.files.push(("coefficients.csv".into(), coefficients));
    Ok(out)
}

fn scan_tell(ctx: &Context) -> Result<StageOutput> {
    let cfg = &ctx.cfg;
    let eps = ctx.res.eps;
    let alpha = ctx.res.alpha;
    let budget = cfg.budget.with_seed(cfg.seed);
    let mut out = StageOutput::new(Stage::ScanTell);
    let mut summary = Vec::new();
    let sys = ctx.system(cfg.depth)?;
    let pair = CalderonPair::new(sys.grid())?;
    for &p in &cfg.scan_p {
        let tag = p_tag(p);
        let direct = scan_t_ell(&sys, &pair, &eps, p, &cfg.ells, None, &budget)?;
        let inverse = scan_t_ell(&sys, &pair, &eps, p, &cfg.ells, Some(ctx.res.i0), &budget)?;
        let mut negative = vec![scan_t_ell(&sys, &pair, &eps, p, &cfg.negative_ells, None, &budget)?];
        if cfg.refine {
            let fine = ctx.system(cfg.depth + 1)?;
            let fine_pair = CalderonPair::new(fine.grid())?;
            negative.push(scan_t_ell(&fine, &fine_pair, &eps, p, &cfg.negative_ells, None, &budget)?);
        }
        let slope = |r: &ScanReport| r.fit.map_or(f64::INFINITY, |f| f.slope);
        out.checks.push(Check::at_most(format!("T_l slope at p = {p}"), slope(&direct), -alpha + 0.25));
        out.checks.push(Check::at_most(format!("T_l R^-1 slope at p = {p}"), slope(&inverse), 1.0 - alpha + 0.25));
        if let [coarse, fine] = &negative[..] {
            out.checks.push(Check::stable(format!("negative-l envelope constant at p = {p}"), coarse.c_fit, fine.c_fit, 0.25));
        }
        out.files.push((format!("scan_tell_p{tag}.csv"), csv(&direct)?));
        out.files.push((format!("scan_tell_inverse_p{tag}.csv"), csv(&inverse)?));
        for r in &negative {
            out.files.push((format!("scan_tell_negative_J{}_p{tag}.csv", r.meta.depth), csv(r)?));
        }
        summary.push(json!({"p": p, "direct": to_json(&direct), "inverse": to_json(&inverse), "negative": to_json(&negative)}));
    }
    out.summary = json!({ "alpha": alpha, "scans": summary });
    Ok(out)
}

fn semenov(ctx: &Context) -> Result<StageOutput> {
    let cfg = &ctx.cfg;
    let sys = ctx.system(cfg.depth)?;
    let unit = scan_semenov(&sys, 2.0, &cfg.mus, &cfg.budget.with_seed(cfg.seed))?;
    let growth = scan_semenov(&sys, cfg.semenov_p, &cfg.mus, &cfg.semenov_budget.with_seed(cfg.seed))?;
    let unitarity = unit.points.iter().map(|pt| (pt.estimate.value() - 1.0).abs()).fold(0.0, f64::max);
    let ratios: Vec<f64> = growth
        .points
        .iter()
        .map(|pt| pt.estimate.value() / (2.0 + pt.value.abs() as f64).ln())
        .collect();
    let spread = ratios.iter().cloned().fold(0.0, f64::max) / ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut out = StageOutput::new(Stage::ScanSemenov);
    out.checks = vec![
        Check::at_most("unitarity at p = 2", unitarity, 1e-10),
        Check::at_most(format!("max/min of norm/log(2+mu) at p = {}", cfg.semenov_p), spread, 3.0),
    ];
    out.files.push(("scan_semenov_p2_00.csv".into(), csv(&unit)?));
    out.files.push((format!("scan_semenov_p{}.csv", p_tag(cfg.semenov_p)), csv(&growth)?));
    out.summary = json!({ "unitary": to_json(&unit), "growth": to_json(&growth), "log_ratios": ratios, "spread": spread });
    Ok(out)
}

fn predecessor(ctx: &Context) -> Result<StageOutput> {
    let cfg = &ctx.cfg;
    let mut out = StageOutput::new(Stage::ScanPredecessor);
    let mut reports = Vec::new();
    for depth in ctx.depths() {
        let sys = ctx.system(depth)?;
        let r = scan_predecessor(&sys, &ctx.res.eps, 2.0, &cfg.lambdas, &cfg.budget.with_seed(cfg.seed))?;
        out.files.push((format!("scan_predecessor_J{depth}.csv"), csv(&r)?));
        reports.push(r);
    }
    if let [coarse, fine] = &reports[..] {
        out.checks.push(Check::stable("predecessor envelope constant", coarse.c_fit, fine.c_fit, 0.25));
    }
    out.summary = json!({ "scans": to_json(&reports) });
    Ok(out)
}

/// Ratios per suite member in suite order; `None` for skipped members.
fn suite_values<F>(suite: &[TestFunction], f: F) -> Result<Vec<Option<f64>>>
where
    F: Fn(&DiscreteField) -> Result<Option<f64>> + Sync,
{
    suite
        .par_iter()
        .map(|t| match f(&t.field) {
            Err(Error::ZeroDenominator(_)) => Ok(None),
            other => other,
        })
        .collect()
}

fn max_of(values: &[Option<f64>]) -> f64 {
    values.iter().flatten().cloned().fold(0.0, f64::max)
}

fn projector_name(p: Projector) -> &'static str {
    match p {
        Projector::Wavelet => "wavelet",
        Projector::Haar => "haar",
    }
}

fn interp_check(ctx: &Context) -> Result<StageOutput> {
    let cfg = &ctx.cfg;
    let mut out = StageOutput::new(Stage::InterpCheck);
    let mut rows = String::from("depth,p,projector,label,ratio\n");
    let mut maxima = Vec::new();
    let mut invariance = 0.0f64;
    for depth in ctx.depths() {
        let sys = ctx.system(depth)?;
        let suite = ctx.suite(&sys, &cfg.suite)?;
        for &p in &cfg.p {
            for proj in [Projector::Wavelet, Projector::Haar] {
                let icfg = InterpConfig::new(p, ctx.res.alpha, ctx.res.i0, ctx.res.eps, proj)?;
                let vals = suite_values(&suite, |u| interp_ratio(u, &icfg, &sys).map(Some))?;
                for (t, v) in suite.iter().zip(&vals) {
                    let v = v.map_or(String::new(), |x| format!("{x:e}"));
                    rows.push_str(&format!("{depth},{p},{},{},{v}\n", projector_name(proj), t.label));
                }
                maxima.push((depth, p, proj, max_of(&vals), vals.iter().filter(|v| v.is_none()).count()));
                if depth == cfg.depth {
                    let u = &suite[0].field;
                    let base = interp_ratio(u, &icfg, &sys)?;
                    for c in [1e-3, 1e3] {
                        let scaled = interp_ratio(&u.scaled_real(c), &icfg, &sys)?;
                        invariance = invariance.max((scaled - base).abs() / base.max(1.0));
                    }
                }
            }
        }
    }
    out.checks.push(Check::at_most("interp ratio scale invariance", invariance, 1e-10));
    for &p in &cfg.p {
        let pick = |d: u32| maxima.iter().find(|m| m.0 == d && m.1 == p && m.2 == Projector::Wavelet).map(|m| m.3);
        if let (Some(a), Some(b)) = (pick(cfg.depth), pick(cfg.depth + 1)) {
            out.checks.push(Check::stable(format!("max interp ratio under refinement at p = {p}"), a, b, 0.25));
        }
    }
    out.summary = json!({
        "alpha": ctx.res.alpha,
        "maxima": maxima.iter().map(|(d, p, proj, m, skipped)| json!({
            "depth": d, "p": p, "projector": projector_name(*proj), "max": m, "skipped": skipped
        })).collect::<Vec<_>>(),
    });
    out.files.push(("interp.csv".into(), rows.into_bytes()));
    Ok(out)
}

fn coercivity(ctx: &Context) -> Result<StageOutput> {
    let cfg = &ctx.cfg;
    let mut out = StageOutput::new(Stage::Coercivity);
    let mut rows = String::from("depth,projector,label,ratio\n");
    let mut maxima = Vec::new();
    for depth in ctx.depths() {
        let sys = ctx.system(depth)?;
        let suite = ctx.suite(&sys, &cfg.suite)?;
        for proj in [Projector::Wavelet, Projector::Haar] {
            let vals = suite_values(&suite, |u| coercivity_check(u, &ctx.res.eps, ctx.res.i0, 2.0, proj, &sys))?;
            for (t, v) in suite.iter().zip(&vals) {
                let v = v.map_or(String::new(), |x| format!("{x:e}"));
                rows.push_str(&format!("{depth},{},{},{v}\n", projector_name(proj), t.label));
            }
            maxima.push((depth, proj, max_of(&vals), vals.iter().filter(|v| v.is_none()).count()));
        }
    }
    for proj in [Projector::Wavelet, Projector::Haar] {
        let pick = |d: u32| maxima.iter().find(|m| m.0 == d && m.1 == proj).map(|m| m.2);
        let name = projector_name(proj);
        if let Some(a) = pick(cfg.depth) {
            out.checks.push(Check::at_most(format!("{name} coercivity constant is finite"), if a.is_finite() { 0.0 } else { 1.0 }, 0.0));
            if let Some(b) = pick(cfg.depth + 1) {
                out.checks.push(Check::stable(format!("{name} coercivity constant under refinement"), a, b, 0.25));
            }
        }
    }
    out.summary = json!({
        "maxima": maxima.iter().map(|(d, proj, m, skipped)| json!({
            "depth": d, "projector": projector_name(*proj), "max": m, "skipped": skipped
        })).collect::<Vec<_>>(),
    });
    out.files.push(("coercivity.csv".into(), rows.into_bytes()));
    Ok(out)
}

fn identity_check(ctx: &Context) -> Result<StageOutput> {
    let cfg = &ctx.cfg;
    let sys = ctx.system(cfg.depth)?;
    let grid = sys.grid();
    let pair = CalderonPair::new(grid)?;
    let i0 = ctx.res.i0;
    let eps = ctx.res.eps;
    let fields = ctx.band_limited(&sys, cfg.identity_fields)?;

    let per_field: Vec<[f64; 5]> = fields
        .par_iter()
        .map(|u| {
            let mut sum = DiscreteField::zeros(grid);
            for a in 0..grid.dim() {
                sum = sum.add(&riesz(&riesz(u, a)?, a)?);
            }
            let algebra = sum.add(u).max_abs();
            let inverse = if grid.dim() == 1 {
                riesz_inverse(u, 0)?.add(&riesz(u, 0)?).max_abs()
            } else {
                0.0
            };
            let integral = partial_derivative(&sectional_integral(u, i0)?, i0)?.max_abs_distance(u);
            let centred = u.sub(&DiscreteField::constant(grid, u.mean())).l2_norm();
            let square = (square_function(u).l2_norm() - centred).abs() / centred.max(1.0);
            let mut representation = 0.0f64;
            for &ell in &cfg.identity_ells {
                representation = representation.max(riesz_identity_check(&sys, &pair, u, ell, &eps, i0)?);
            }
            Ok([algebra, inverse, integral, square, representation])
        })
        .collect::<Result<_>>()?;
    let worst = |k: usize| per_field.iter().map(|r| r[k]).fold(0.0, f64::max);

    let mut out = StageOutput::new(Stage::IdentityCheck);
    out.checks = vec![
        Check::at_most("sum of R_i^2 equals -I", worst(0), 1e-10),
        Check::at_most("d_i0 E_i0 equals I", worst(2), 1e-10),
        Check::at_most("square function identity", worst(3), 1e-8),
        Check::at_most("Riesz representation residual", worst(4), 1e-6),
    ];
    if grid.dim() == 1 {
        out.checks.insert(1, Check::at_most("R^-1 equals -R in one dimension", worst(1), 1e-10));
    }
    let mut rows = String::from("field,riesz_algebra,inverse,integral,square_function,representation\n");
    for (i, r) in per_field.iter().enumerate() {
        rows.push_str(&format!("{i},{:e},{:e},{:e},{:e},{:e}\n", r[0], r[1], r[2], r[3], r[4]));
    }
    out.files.push(("identities.csv".into(), rows.into_bytes()));
    out.summary = json!({ "fields": fields.len(), "ells": cfg.identity_ells });
    Ok(out)
}
