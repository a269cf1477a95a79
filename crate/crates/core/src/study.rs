//! Sweep orchestration: solves the limit model once and the full problem
//! per eps on the same mesh and time grid, computes the regime's
//! theorem-listed error norms, runs the a priori and structural checks, and
//! emits report tables.

use crate::effective::compute_effective;
use crate::exponents::{validate_exponents, FlowRegime, Ratio, RegimeDescriptor, ScalingExponents};
use crate::full_solver::{solve_transient, BiotRunConfig, TransientSolution};
use crate::geometry::Geometry;
use crate::limit_solver::{build_limit_problem, solve_limit};
use crate::materials::MaterialFields;
use crate::mesh::{FracturedMesh, Subdomain};
use crate::norms::{
    dn_sq_frac, eeps_sq_frac, epar_sq_frac, gamma_trace, grad_sq_region, l2_gamma_sq, l2_sq_region,
    l2_time, l2_time_derivative, linf_time, strip_edge_trace, FieldSet,
};
use crate::{Error, Result};

/// Sweep configuration: one mesh and time grid shared by the limit solve
/// and every full solve.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub geometry: Geometry,
    pub exponents: ScalingExponents,
    pub materials: MaterialFields,
    pub h: f64,
    pub dt: f64,
    pub t_end: f64,
    pub eps_list: Vec<f64>,
    pub jobs: usize,
    /// eps power for the deliberately inadmissible fracture source check
    pub frac_source_eps_power: f64,
}

impl SweepConfig {
    pub fn new(exponents: ScalingExponents) -> Self {
        SweepConfig {
            geometry: Geometry::default_unit(),
            exponents,
            materials: MaterialFields::default_study(),
            h: 1.0 / 16.0,
            dt: 1.0 / 20.0,
            t_end: 0.5,
            eps_list: vec![0.5, 0.25, 0.125, 0.0625],
            jobs: 1,
            frac_source_eps_power: 0.0,
        }
    }

    fn run_config(&self, eps: f64) -> BiotRunConfig {
        let mut cfg = BiotRunConfig::new(self.geometry.clone(), self.exponents, eps);
        cfg.materials = self.materials.clone();
        cfg.t_end = self.t_end;
        cfg.dt = self.dt;
        cfg.frac_source_eps_power = self.frac_source_eps_power;
        cfg
    }
}

/// Error report: rows (epsilon, norm_name, value) plus verdicts.
#[derive(Debug, Clone)]
pub struct ErrorReport {
    pub rows: Vec<(f64, String, f64)>,
    pub regime: RegimeDescriptor,
    pub h: f64,
    pub dt: f64,
    pub config_hash: u64,
    /// (name, pass, detail)
    pub verdicts: Vec<(String, bool, String)>,
}

impl ErrorReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epsilon,norm_name,value\n");
        for (e, n, v) in &self.rows {
            s.push_str(&format!("{:.16e},{},{:.16e}\n", e, n, v));
        }
        s
    }

    pub fn verdicts_text(&self) -> String {
        let mut s = String::new();
        for (name, pass, detail) in &self.verdicts {
            s.push_str(&format!(
                "{} {}: {}\n",
                if *pass { "PASS" } else { "FAIL" },
                name,
                detail
            ));
        }
        s
    }

    pub fn values_for(&self, name: &str) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter(|(_, n, _)| n == name)
            .map(|(e, _, v)| (*e, *v))
            .collect()
    }

    pub fn all_pass(&self) -> bool {
        self.verdicts.iter().all(|(_, p, _)| *p)
    }
}

/// FNV-1a over bytes, the deterministic config hash used in manifests.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn theta(nu: Ratio) -> f64 {
    ScalingExponents::theta(nu)
}
fn iota(nu: Ratio) -> f64 {
    ScalingExponents::iota(nu)
}

struct LevelFields {
    u: Vec<FieldSet>,
    p: Vec<FieldSet>,
}

fn extract_levels(mesh: &FracturedMesh, sol: &TransientSolution) -> LevelFields {
    let u = (0..sol.times.len())
        .map(|k| FieldSet::from_coeffs(mesh, &sol.u_space, &sol.u_coeffs[k]))
        .collect();
    let p = (0..sol.times.len())
        .map(|k| FieldSet::from_coeffs(mesh, &sol.p_space, &sol.p_coeffs[k]))
        .collect();
    LevelFields { u, p }
}

fn bulk_h1_sq(mesh: &FracturedMesh, f: &FieldSet) -> f64 {
    l2_sq_region(mesh, f, Subdomain::Plus)
        + l2_sq_region(mesh, f, Subdomain::Minus)
        + grad_sq_region(mesh, f, Subdomain::Plus, None)
        + grad_sq_region(mesh, f, Subdomain::Minus, None)
}

fn bulk_l2_sq(mesh: &FracturedMesh, f: &FieldSet) -> f64 {
    l2_sq_region(mesh, f, Subdomain::Plus) + l2_sq_region(mesh, f, Subdomain::Minus)
}

fn frac_hn1_sq(mesh: &FracturedMesh, f: &FieldSet) -> f64 {
    l2_sq_region(mesh, f, Subdomain::Fracture) + dn_sq_frac(mesh, f)
}

fn frac_h1_sq(mesh: &FracturedMesh, f: &FieldSet) -> f64 {
    l2_sq_region(mesh, f, Subdomain::Fracture) + grad_sq_region(mesh, f, Subdomain::Fracture, None)
}

/// zeta^# per fracture element from the limit pressure:
/// -(K_f^N)^-1 (K_f grad_par p) . N, elementwise P1 differentiation.
fn zeta_sharp_elements(mesh: &FracturedMesh, mat: &MaterialFields, p_sharp: &FieldSet) -> Vec<f64> {
    let mut out = vec![0.0; mesh.n_triangles()];
    for t in 0..mesh.n_triangles() {
        if mesh.triangle_region[t] != Subdomain::Fracture {
            continue;
        }
        let g = crate::assembly::tri_geom(mesh, t);
        let k = mat.cond_frac.eval(g.centroid);
        let mut gy = 0.0;
        for i in 0..3 {
            gy += p_sharp.at(g.verts[i], 0) * g.grad[i][1];
        }
        out[t] = -k[0][1] * gy / k[0][0];
    }
    out
}

/// Squared L2(strip) distance of eps^-1 dN p^eps from zeta^# N.
fn zeta_error_sq(mesh: &FracturedMesh, p_eps: &FieldSet, zeta: &[f64], eps: f64) -> f64 {
    let mut acc = 0.0;
    for t in 0..mesh.n_triangles() {
        if mesh.triangle_region[t] != Subdomain::Fracture {
            continue;
        }
        let g = crate::assembly::tri_geom(mesh, t);
        let mut gx = 0.0;
        for i in 0..3 {
            gx += p_eps.at(g.verts[i], 0) * g.grad[i][0];
        }
        let d = gx / eps - zeta[t];
        acc += g.area * d * d;
    }
    acc
}

/// Squared L2(strip) norm of eps grad_par p^eps.
fn tangential_grad_sq(mesh: &FracturedMesh, p_eps: &FieldSet, eps: f64) -> f64 {
    let mut acc = 0.0;
    for t in 0..mesh.n_triangles() {
        if mesh.triangle_region[t] != Subdomain::Fracture {
            continue;
        }
        let g = crate::assembly::tri_geom(mesh, t);
        let mut gy = 0.0;
        for i in 0..3 {
            gy += p_eps.at(g.verts[i], 0) * g.grad[i][1];
        }
        acc += g.area * (eps * gy) * (eps * gy);
    }
    acc
}

/// Whether the H1-in-time rows are enabled: the source condition
/// 2 nu_q >= nu_omega - 1 plus the regime's initial-gradient requirement,
/// verified on sampled initial data.
fn h1_time_rows_enabled(cfg: &SweepConfig, regime: &RegimeDescriptor) -> bool {
    let e = &cfg.exponents;
    if e.nu_q.mul2() < e.nu_omega.add_int(-1) {
        return false;
    }
    let p0 = |s: f64, y: f64| cfg.materials.p0_frac.eval([s, y], 0.0);
    let mut dn: f64 = 0.0;
    let mut dy: f64 = 0.0;
    for i in 0..8 {
        for j in 0..8 {
            let s = -0.4 + 0.8 * (i as f64) / 7.0;
            let y = 0.05 + 0.9 * (j as f64) / 7.0;
            dn = dn.max((p0(s + 1e-4, y) - p0(s, y)).abs() / 1e-4);
            dy = dy.max((p0(s, y + 1e-4) - p0(s, y)).abs() / 1e-4);
        }
    }
    match regime.flow {
        FlowRegime::IdealConduit => dn < 1e-9 && dy < 1e-9,
        FlowRegime::Conduit | FlowRegime::Neutral => dn < 1e-9,
        FlowRegime::Barrier | FlowRegime::Wall => true,
    }
}

/// Theorem-listed norm names for a regime, in report order.
pub fn norm_names_for(regime: &RegimeDescriptor, h1_time: bool) -> Vec<String> {
    let mut names = vec![
        "u_bulk_L2H1".to_string(),
        "uf_L2HN1".to_string(),
        "uf_epar_L2".to_string(),
        "p_bulk_L2H1".to_string(),
    ];
    match regime.flow {
        FlowRegime::IdealConduit => names.push("pf_L2H1".into()),
        FlowRegime::Conduit => {
            names.push("pf_L2H1".into());
            names.push("pf_zeta_L2".into());
        }
        FlowRegime::Neutral => names.push("pf_L2HN1".into()),
        FlowRegime::Barrier => {
            names.push("pf_L2HN1".into());
            names.push("pf_tpar_L2".into());
        }
        FlowRegime::Wall => names.push("pf_L2L2".into()),
    }
    if h1_time {
        names.push("u_bulk_H1tH1".into());
        names.push("uf_H1tHN1".into());
        names.push("uf_epar_H1t".into());
        names.push("p_bulk_H1tL2".into());
        if regime.storage_present {
            names.push("pf_H1tL2".into());
        }
    }
    names
}

struct EpsRun {
    eps: f64,
    rows: Vec<(String, f64)>,
    apriori: Vec<(String, f64)>,
    structural: Vec<(String, f64)>,
}

fn eps_error_rows(
    cfg: &SweepConfig,
    mesh: &FracturedMesh,
    regime: &RegimeDescriptor,
    limit: &LevelFields,
    eps: f64,
    h1_time: bool,
) -> Result<EpsRun> {
    let run_cfg = cfg.run_config(eps);
    let full = solve_transient(mesh, &run_cfg)?;
    let fl = extract_levels(mesh, &full);
    let times = &full.times;
    let nl = times.len();
    let th_c = theta(cfg.exponents.nu_c);
    let io_c = iota(cfg.exponents.nu_c);

    // error fields per level: fracture displacement scaled by eps^theta
    let mut u_err: Vec<FieldSet> = Vec::with_capacity(nl);
    let mut p_err: Vec<FieldSet> = Vec::with_capacity(nl);
    for k in 0..nl {
        u_err.push(
            fl.u[k]
                .scale_fracture(mesh, eps.powf(th_c))
                .diff(&limit.u[k]),
        );
        p_err.push(fl.p[k].diff(&limit.p[k]));
    }

    let series = |sq: &dyn Fn(usize) -> f64| -> Vec<f64> { (0..nl).map(sq).collect() };
    let mut rows: Vec<(String, f64)> = Vec::new();

    // common rows
    let ub: Vec<f64> = series(&|k| bulk_h1_sq(mesh, &u_err[k]));
    rows.push(("u_bulk_L2H1".into(), l2_time(times, &ub)));
    let uf: Vec<f64> = series(&|k| frac_hn1_sq(mesh, &u_err[k]));
    rows.push(("uf_L2HN1".into(), l2_time(times, &uf)));
    let ue: Vec<f64> = series(&|k| eps.powf(2.0 * io_c) * epar_sq_frac(mesh, &fl.u[k]));
    rows.push(("uf_epar_L2".into(), l2_time(times, &ue)));
    let pb: Vec<f64> = series(&|k| bulk_h1_sq(mesh, &p_err[k]));
    rows.push(("p_bulk_L2H1".into(), l2_time(times, &pb)));

    // fracture pressure rows
    match regime.flow {
        FlowRegime::IdealConduit => {
            let v: Vec<f64> = series(&|k| frac_h1_sq(mesh, &p_err[k]));
            rows.push(("pf_L2H1".into(), l2_time(times, &v)));
        }
        FlowRegime::Conduit => {
            let v: Vec<f64> = series(&|k| frac_h1_sq(mesh, &p_err[k]));
            rows.push(("pf_L2H1".into(), l2_time(times, &v)));
            let z: Vec<f64> = series(&|k| {
                let zeta = zeta_sharp_elements(mesh, &cfg.materials, &limit.p[k]);
                zeta_error_sq(mesh, &fl.p[k], &zeta, eps)
            });
            rows.push(("pf_zeta_L2".into(), l2_time(times, &z)));
        }
        FlowRegime::Neutral => {
            let v: Vec<f64> = series(&|k| frac_hn1_sq(mesh, &p_err[k]));
            rows.push(("pf_L2HN1".into(), l2_time(times, &v)));
        }
        FlowRegime::Barrier => {
            let v: Vec<f64> = series(&|k| frac_hn1_sq(mesh, &p_err[k]));
            rows.push(("pf_L2HN1".into(), l2_time(times, &v)));
            let tp: Vec<f64> = series(&|k| tangential_grad_sq(mesh, &fl.p[k], eps));
            rows.push(("pf_tpar_L2".into(), l2_time(times, &tp)));
        }
        FlowRegime::Wall => {
            let v: Vec<f64> = series(&|k| l2_sq_region(mesh, &p_err[k], Subdomain::Fracture));
            rows.push(("pf_L2L2".into(), l2_time(times, &v)));
        }
    }

    // H1-in-time companions
    if h1_time {
        let dseq = |fields: &[FieldSet], sq: &dyn Fn(&FieldSet) -> f64| -> Vec<f64> {
            (0..nl - 1)
                .map(|k| {
                    let d = fields[k + 1].diff(&fields[k]);
                    sq(&d)
                })
                .collect()
        };
        let h1 = |l2part: &[f64], dpart: &[f64]| -> f64 {
            let a = l2_time(times, l2part);
            let b = l2_time_derivative(times, dpart);
            (a * a + b * b).sqrt()
        };
        rows.push((
            "u_bulk_H1tH1".into(),
            h1(&ub, &dseq(&u_err, &|d| bulk_h1_sq(mesh, d))),
        ));
        rows.push((
            "uf_H1tHN1".into(),
            h1(&uf, &dseq(&u_err, &|d| frac_hn1_sq(mesh, d))),
        ));
        let de: Vec<f64> = (0..nl - 1)
            .map(|k| {
                let d = fl.u[k + 1].diff(&fl.u[k]);
                eps.powf(2.0 * io_c) * epar_sq_frac(mesh, &d)
            })
            .collect();
        rows.push(("uf_epar_H1t".into(), h1(&ue, &de)));
        let pbl: Vec<f64> = series(&|k| bulk_l2_sq(mesh, &p_err[k]));
        rows.push((
            "p_bulk_H1tL2".into(),
            h1(&pbl, &dseq(&p_err, &|d| bulk_l2_sq(mesh, d))),
        ));
        if regime.storage_present {
            let pfl: Vec<f64> = series(&|k| l2_sq_region(mesh, &p_err[k], Subdomain::Fracture));
            rows.push((
                "pf_H1tL2".into(),
                h1(
                    &pfl,
                    &dseq(&p_err, &|d| l2_sq_region(mesh, d, Subdomain::Fracture)),
                ),
            ));
        }
    }

    // a priori scaled quantities (the five estimate families)
    let mut apriori: Vec<(String, f64)> = Vec::new();
    {
        let e = &cfg.exponents;
        let w_u = eps.powf(theta(e.nu_c));
        let w_grad = eps.powf(iota(e.nu_c).max(0.5));
        let w_e = eps.powf(iota(e.nu_c));
        let w_p_inf = eps.powf(iota(e.nu_omega).min(theta(e.nu_k)));
        let w_p_h1 = eps.powf(iota(e.nu_omega));
        let w_gp = eps.powf(iota(e.nu_k));

        let lvl_sq = |f: &FieldSet, wf: f64| -> f64 {
            bulk_l2_sq(mesh, f) + wf * wf * l2_sq_region(mesh, f, Subdomain::Fracture)
        };
        let grad_lvl_sq = |f: &FieldSet, wf: f64| -> f64 {
            grad_sq_region(mesh, f, Subdomain::Plus, None)
                + grad_sq_region(mesh, f, Subdomain::Minus, None)
                + wf * wf * grad_sq_region(mesh, f, Subdomain::Fracture, Some(eps))
        };
        let strain_lvl_sq = |f: &FieldSet, wf: f64| -> f64 {
            crate::norms::strain_sq_bulk(mesh, f) + wf * wf * eeps_sq_frac(mesh, f, eps)
        };
        let d_of = |fields: &[FieldSet], sq: &dyn Fn(&FieldSet) -> f64| -> Vec<f64> {
            (0..nl - 1)
                .map(|k| sq(&fields[k + 1].diff(&fields[k])))
                .collect()
        };
        let linf_h1 = |lvl: &[f64], dlvl: &[f64]| -> f64 {
            linf_time(&lvl.iter().map(|v| v.sqrt()).collect::<Vec<_>>())
                + (l2_time(times, lvl).powi(2) + l2_time_derivative(times, dlvl).powi(2)).sqrt()
        };

        let qa: Vec<f64> = series(&|k| lvl_sq(&fl.u[k], w_u));
        apriori.push((
            "apriori_a".into(),
            linf_h1(&qa, &d_of(&fl.u, &|d| lvl_sq(d, w_u))),
        ));
        let qb: Vec<f64> = series(&|k| grad_lvl_sq(&fl.u[k], w_grad));
        apriori.push((
            "apriori_b".into(),
            linf_h1(&qb, &d_of(&fl.u, &|d| grad_lvl_sq(d, w_grad))),
        ));
        let qc: Vec<f64> = series(&|k| strain_lvl_sq(&fl.u[k], w_e));
        apriori.push((
            "apriori_c".into(),
            linf_h1(&qc, &d_of(&fl.u, &|d| strain_lvl_sq(d, w_e))),
        ));
        let qd_inf: Vec<f64> = series(&|k| lvl_sq(&fl.p[k], w_p_inf));
        let qd_h1: Vec<f64> = series(&|k| lvl_sq(&fl.p[k], w_p_h1));
        let qd_d = d_of(&fl.p, &|d| lvl_sq(d, w_p_h1));
        apriori.push((
            "apriori_d".into(),
            linf_time(&qd_inf.iter().map(|v| v.sqrt()).collect::<Vec<_>>())
                + (l2_time(times, &qd_h1).powi(2) + l2_time_derivative(times, &qd_d).powi(2))
                    .sqrt(),
        ));
        let qe: Vec<f64> = series(&|k| grad_lvl_sq(&fl.p[k], w_gp));
        apriori.push((
            "apriori_e".into(),
            linf_time(&qe.iter().map(|v| v.sqrt()).collect::<Vec<_>>()),
        ));
    }

    // structural quantities at final time
    let mut structural: Vec<(String, f64)> = Vec::new();
    {
        let last = nl - 1;
        let plus_tr = gamma_trace(mesh, &fl.p[last], true, 0);
        let p_nodal: Vec<f64> = (0..mesh.n_vertices())
            .map(|v| fl.p[last].at(v, 0))
            .collect();
        let means = crate::effective::average_normal(
            mesh,
            &crate::effective::ColumnField::Nodal(&p_nodal),
        )?;
        let defect: Vec<f64> = plus_tr
            .iter()
            .zip(means.iter())
            .map(|(a, b)| a - b)
            .collect();
        structural.push((
            "continuity_defect".into(),
            l2_gamma_sq(mesh, &defect).sqrt(),
        ));
        structural.push((
            "pf_grad".into(),
            grad_sq_region(mesh, &fl.p[last], Subdomain::Fracture, None).sqrt(),
        ));
        let mut tr_sq = 0.0;
        for plus_edge in [false, true] {
            for c in 0..2 {
                let tr = strip_edge_trace(mesh, &fl.u[last], plus_edge, c);
                let scaled: Vec<f64> = tr.iter().map(|v| v * eps.powf(th_c)).collect();
                tr_sq += l2_gamma_sq(mesh, &scaled);
            }
        }
        structural.push(("uf_edge_trace".into(), tr_sq.sqrt()));
    }

    Ok(EpsRun {
        eps,
        rows,
        apriori,
        structural,
    })
}

/// Full sweep: limit solve once, full solve per eps, all theorem rows.
pub fn run_sweep(cfg: &SweepConfig) -> Result<ErrorReport> {
    for w in cfg.eps_list.windows(2) {
        if w[1] >= w[0] {
            return Err(Error::Study("eps_list must be strictly decreasing".into()));
        }
    }
    if cfg.eps_list.is_empty() || cfg.eps_list[0] > 1.0 {
        return Err(Error::Study("eps_list must lie in (0, 1]".into()));
    }
    let regime = validate_exponents(&cfg.exponents, &cfg.geometry)?;
    let mesh = crate::mesh::build_mesh(&cfg.geometry, cfg.h)?;
    cfg.materials.validate(&mesh)?;
    let eff = compute_effective(&cfg.materials, &cfg.exponents, &regime, &mesh)?;
    let problem = build_limit_problem(&regime, &eff, &mesh, false)?;
    let limit_sol = solve_limit(&problem, &mesh, &cfg.materials, cfg.t_end, cfg.dt)?;
    let limit = extract_levels(&mesh, &limit_sol);
    let h1_time = h1_time_rows_enabled(cfg, &regime);

    let runs: Vec<EpsRun> = if cfg.jobs > 1 {
        let mut results: Vec<Option<Result<EpsRun>>> =
            (0..cfg.eps_list.len()).map(|_| None).collect();
        std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for (i, &eps) in cfg.eps_list.iter().enumerate() {
                let mesh = &mesh;
                let regime = &regime;
                let limit = &limit;
                handles.push((
                    i,
                    scope.spawn(move || eps_error_rows(cfg, mesh, regime, limit, eps, h1_time)),
                ));
            }
            for (i, h) in handles {
                results[i] = Some(h.join().expect("sweep worker panicked"));
            }
        });
        results
            .into_iter()
            .map(|r| r.unwrap())
            .collect::<Result<Vec<_>>>()?
    } else {
        cfg.eps_list
            .iter()
            .map(|&eps| eps_error_rows(cfg, &mesh, &regime, &limit, eps, h1_time))
            .collect::<Result<Vec<_>>>()?
    };

    let mut rows = Vec::new();
    for run in &runs {
        for (name, v) in run
            .rows
            .iter()
            .chain(run.apriori.iter())
            .chain(run.structural.iter())
        {
            rows.push((run.eps, name.clone(), *v));
        }
    }

    // verdicts: strict decrease by at least 5% per step for the theorem
    // rows, halving for the leading bulk norms, a priori ratios <= 3
    let mut verdicts = Vec::new();
    let names = norm_names_for(&regime, h1_time);
    for name in &names {
        let vals: Vec<f64> = runs
            .iter()
            .map(|r| {
                r.rows
                    .iter()
                    .find(|(n, _)| n == name)
                    .map(|(_, v)| *v)
                    .unwrap_or(f64::NAN)
            })
            .collect();
        let mut ok = true;
        for w in vals.windows(2) {
            if !(w[1] <= 0.95 * w[0]) {
                ok = false;
            }
        }
        verdicts.push((
            format!("decrease_{name}"),
            ok,
            format!(
                "values {:?}",
                vals.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>()
            ),
        ));
    }
    for name in ["u_bulk_L2H1", "p_bulk_L2H1"] {
        let vals: Vec<f64> = runs
            .iter()
            .map(|r| {
                r.rows
                    .iter()
                    .find(|(n, _)| n == name)
                    .map(|(_, v)| *v)
                    .unwrap()
            })
            .collect();
        let ok = vals.last().unwrap() <= &(0.5 * vals[0]);
        verdicts.push((
            format!("halving_{name}"),
            ok,
            format!("first {:.3e} last {:.3e}", vals[0], vals.last().unwrap()),
        ));
    }
    for q in [
        "apriori_a",
        "apriori_b",
        "apriori_c",
        "apriori_d",
        "apriori_e",
    ] {
        let vals: Vec<f64> = runs
            .iter()
            .map(|r| {
                r.apriori
                    .iter()
                    .find(|(n, _)| n == q)
                    .map(|(_, v)| *v)
                    .unwrap()
            })
            .collect();
        let base = vals[0].max(1e-300);
        let ratio = vals.iter().cloned().fold(0.0f64, f64::max) / base;
        verdicts.push((
            format!("bounded_{q}"),
            ratio <= 3.0,
            format!("max/first ratio {ratio:.3}"),
        ));
    }
    let structural_names: Vec<(&str, bool)> = vec![
        ("continuity_defect", flow_lt_one(&regime)),
        ("pf_grad", regime.flow == FlowRegime::IdealConduit),
        (
            "uf_edge_trace",
            regime.mech == crate::exponents::MechRegime::VerySoft,
        ),
    ];
    for (name, active) in structural_names {
        if !active {
            continue;
        }
        let vals: Vec<f64> = runs
            .iter()
            .map(|r| {
                r.structural
                    .iter()
                    .find(|(n, _)| n == name)
                    .map(|(_, v)| *v)
                    .unwrap()
            })
            .collect();
        let ok = vals.windows(2).all(|w| w[1] < w[0]);
        verdicts.push((
            format!("decay_{name}"),
            ok,
            format!(
                "values {:?}",
                vals.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>()
            ),
        ));
    }

    let hash = fnv1a(
        format!(
            "{:?}|{:?}|{}|{}|{}|{:?}|{}",
            cfg.exponents,
            regime,
            cfg.h,
            cfg.dt,
            cfg.t_end,
            cfg.eps_list,
            cfg.frac_source_eps_power
        )
        .as_bytes(),
    );
    Ok(ErrorReport {
        rows,
        regime,
        h: cfg.h,
        dt: cfg.dt,
        config_hash: hash,
        verdicts,
    })
}

fn flow_lt_one(regime: &RegimeDescriptor) -> bool {
    matches!(
        regime.flow,
        FlowRegime::IdealConduit | FlowRegime::Conduit | FlowRegime::Neutral
    )
}

/// A priori boundedness: per scaled quantity, max over the sweep divided by
/// the value at the largest eps, flagged above 3.
pub fn check_apriori(cfg: &SweepConfig) -> Result<Vec<(String, f64, bool)>> {
    let report = run_sweep(cfg)?;
    let mut out = Vec::new();
    for q in [
        "apriori_a",
        "apriori_b",
        "apriori_c",
        "apriori_d",
        "apriori_e",
    ] {
        let vals = report.values_for(q);
        let base = vals[0].1.max(1e-300);
        let ratio = vals.iter().map(|(_, v)| *v).fold(0.0f64, f64::max) / base;
        out.push((q.to_string(), ratio, ratio <= 3.0));
    }
    Ok(out)
}

/// Two-path equivalence: solves the two-scale and reduced variants on the
/// same mesh/timestep and reports the max nodal difference of the bulk
/// displacement and bulk pressure over all time levels.
pub fn check_equivalence(cfg: &SweepConfig) -> Result<(f64, f64)> {
    let regime = validate_exponents(&cfg.exponents, &cfg.geometry)?;
    let mesh = crate::mesh::build_mesh(&cfg.geometry, cfg.h)?;
    let eff = compute_effective(&cfg.materials, &cfg.exponents, &regime, &mesh)?;
    let two = build_limit_problem(&regime, &eff, &mesh, false)?;
    let red = build_limit_problem(&regime, &eff, &mesh, true)?;
    let s2 = solve_limit(&two, &mesh, &cfg.materials, cfg.t_end, cfg.dt)?;
    let sr = solve_limit(&red, &mesh, &cfg.materials, cfg.t_end, cfg.dt)?;
    let mut du = 0.0f64;
    let mut dp = 0.0f64;
    for k in 0..s2.times.len() {
        let u2 = FieldSet::from_coeffs(&mesh, &s2.u_space, &s2.u_coeffs[k]);
        let ur = FieldSet::from_coeffs(&mesh, &sr.u_space, &sr.u_coeffs[k]);
        let p2 = FieldSet::from_coeffs(&mesh, &s2.p_space, &s2.p_coeffs[k]);
        let pr = FieldSet::from_coeffs(&mesh, &sr.p_space, &sr.p_coeffs[k]);
        for v in 0..mesh.n_vertices() {
            if mesh.vertex_region[v] == Subdomain::Fracture {
                continue;
            }
            for c in 0..2 {
                du = du.max((u2.at(v, c) - ur.at(v, c)).abs());
            }
            dp = dp.max((p2.at(v, 0) - pr.at(v, 0)).abs());
        }
    }
    Ok((du, dp))
}

/// Scaled fracture-trace values per eps for very soft sweeps; strict
/// decrease is the caller's verdict.
pub fn check_trace_decay(cfg: &SweepConfig) -> Result<Vec<(f64, f64)>> {
    let report = run_sweep(cfg)?;
    Ok(report.values_for("uf_edge_trace"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_rejects_bad_eps_lists() {
        let exp = ScalingExponents::coupling_active(Ratio::int(1), Ratio::int(0));
        let mut cfg = SweepConfig::new(exp);
        cfg.eps_list = vec![0.25, 0.5];
        assert!(run_sweep(&cfg).is_err());
    }

    #[test]
    fn zero_data_gives_zero_rows() {
        let exp = ScalingExponents::coupling_active(Ratio::int(1), Ratio::int(0));
        let mut cfg = SweepConfig::new(exp);
        cfg.materials = MaterialFields::unit();
        cfg.h = 0.25;
        cfg.dt = 0.1;
        cfg.t_end = 0.2;
        cfg.eps_list = vec![0.5, 0.25];
        let report = run_sweep(&cfg).unwrap();
        for (_, name, v) in &report.rows {
            if name.starts_with("apriori") {
                continue;
            }
            assert!(v.abs() < 1e-10, "{name} = {v}");
        }
    }

    #[test]
    fn neutral_sweep_errors_decrease_coarse() {
        // coarse smoke version of the acceptance sweep
        let exp = ScalingExponents::coupling_active(Ratio::int(1), Ratio::int(0));
        let mut cfg = SweepConfig::new(exp);
        cfg.h = 0.25;
        cfg.dt = 0.1;
        cfg.t_end = 0.3;
        cfg.eps_list = vec![0.5, 0.25, 0.125];
        let report = run_sweep(&cfg).unwrap();
        let vals = report.values_for("u_bulk_L2H1");
        assert_eq!(vals.len(), 3);
        assert!(vals[1].1 < vals[0].1 && vals[2].1 < vals[1].1, "{vals:?}");
        let pv = report.values_for("p_bulk_L2H1");
        assert!(pv[2].1 < pv[1].1 && pv[1].1 < pv[0].1, "{pv:?}");
    }

    #[test]
    fn theorem_rows_appear_exactly_once_per_eps() {
        let exp = ScalingExponents::coupling_active(Ratio::int(1), Ratio::int(1));
        let mut cfg = SweepConfig::new(exp);
        cfg.h = 0.25;
        cfg.dt = 0.1;
        cfg.t_end = 0.2;
        cfg.eps_list = vec![0.5, 0.25];
        let report = run_sweep(&cfg).unwrap();
        let names = norm_names_for(&report.regime, true);
        for name in &names {
            for &eps in &cfg.eps_list {
                let count = report
                    .rows
                    .iter()
                    .filter(|(e, n, _)| *e == eps && n == name)
                    .count();
                assert_eq!(count, 1, "{name} at eps={eps} appears {count} times");
            }
        }
    }

    #[test]
    fn report_hash_and_bytes_deterministic() {
        let exp = ScalingExponents::coupling_active(Ratio::int(1), Ratio::int(0));
        let mut cfg = SweepConfig::new(exp);
        cfg.h = 0.5;
        cfg.dt = 0.1;
        cfg.t_end = 0.2;
        cfg.eps_list = vec![0.5, 0.25];
        let a = run_sweep(&cfg).unwrap();
        let b = run_sweep(&cfg).unwrap();
        assert_eq!(a.config_hash, b.config_hash);
        assert_eq!(a.to_csv(), b.to_csv());
    }

    #[test]
    fn parallel_sweep_matches_serial() {
        let exp = ScalingExponents::coupling_active(Ratio::int(1), Ratio::int(-1));
        let mut cfg = SweepConfig::new(exp);
        cfg.h = 0.25;
        cfg.dt = 0.1;
        cfg.t_end = 0.2;
        cfg.eps_list = vec![0.5, 0.25];
        let serial = run_sweep(&cfg).unwrap();
        cfg.jobs = 2;
        let parallel = run_sweep(&cfg).unwrap();
        assert_eq!(serial.to_csv(), parallel.to_csv());
    }
}
