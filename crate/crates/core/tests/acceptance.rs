//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::process::ExitCode;
use std::time::Instant;

use proptest::strategy::{Strategy, ValueTree};
use proptest::test_runner::TestRunner;

use ustrong_core::convergence::check_truncation;
use ustrong_core::correlations::{
    g2_cross_filtered, g2_tau, linspace, local_maxima, oscillation_frequency, Normalization,
    SpectrumEvaluator, StationarySource,
};
use ustrong_core::dressed::{dress, level_sweep};
use ustrong_core::dynamics::{all_rates, build_liouvillian, standard_me_g2, steady_state, BathSpec};
use ustrong_core::model::{
    ModeParams, ModelSpec, MultiTlsParams, RabiParams, TwoModeParams,
};
use ustrong_core::operator::{CMatrix, C64};
use ustrong_core::thermal::{g2_zero, thermal_state};
use ustrong_core::Result;

const GAMMA: f64 = 0.01;
const N_FOCK: usize = 20;

struct Marker {
    name: &'static str,
    g: f64,
    t: f64,
}

const DIAMOND: Marker = Marker { name: "diamond", g: 0.1, t: 0.2 };
const TRIANGLE: Marker = Marker { name: "triangle", g: 0.2, t: 0.1 };
const SQUARE: Marker = Marker { name: "square", g: 0.5, t: 0.07 };
const DOT: Marker = Marker { name: "dot", g: 0.9, t: 0.15 };
const MARKERS: [Marker; 4] = [DIAMOND, TRIANGLE, SQUARE, DOT];

fn rabi(g: f64, n_fock: usize) -> ModelSpec {
    ModelSpec::Rabi(RabiParams::resonant(g, n_fock))
}

fn source(m: &Marker, ga: f64, gx: f64) -> Result<StationarySource> {
    StationarySource::new(&rabi(m.g, N_FOCK).build()?, BathSpec::new(ga, gx, m.t)?, None)
}

fn thermal_g2(spec: &ModelSpec, t: f64) -> Result<f64> {
    let (basis, table) = dress(&spec.build()?)?;
    let state = thermal_state(&basis, t)?;
    g2_zero(&basis, &table, &state, basis.default_level_cut(t))
}

type Outcome = Result<(bool, String)>;

fn marker_regions() -> Outcome {
    let start = Instant::now();
    let mut v = Vec::new();
    for m in &MARKERS {
        v.push(thermal_g2(&rabi(m.g, N_FOCK), m.t)?);
    }
    let secs = start.elapsed().as_secs_f64();
    let ok = [
        v[0] > 1.999 && v[0] < 2.0,
        v[1] > 1.0 && v[1] < 1.999,
        v[2] < 1.0,
        v[3] > 2.0,
    ];
    let detail = MARKERS
        .iter()
        .zip(&v)
        .zip(ok)
        .map(|((m, x), o)| format!("{}={x:.6}{}", m.name, if o { "" } else { "(out)" }))
        .collect::<Vec<_>>()
        .join(" ");
    Ok((ok.iter().all(|&o| o) && secs < 10.0, format!("{detail} runtime={secs:.2}s")))
}

fn baseline_flatness() -> Outcome {
    let mut worst: f64 = 0.0;
    for m in &MARKERS {
        let params = RabiParams { n_fock: 8, ..RabiParams::resonant(m.g, 8) };
        let v = standard_me_g2(&params, &BathSpec::new(GAMMA, GAMMA, m.t)?)?;
        worst = worst.max((v - 2.0).abs());
    }
    Ok((worst <= 1e-4, format!("max |g2-2| = {worst:.3e}")))
}

fn level_crossing() -> Outcome {
    let grid = linspace(0.0, 1.0, 101);
    let sweep = level_sweep(|g| rabi(g, N_FOCK).build(), &grid, 6)?;
    let c = sweep.crossings.iter().find(|c| c.lower == 2 && c.upper == 3);
    Ok(match c {
        Some(c) => (
            c.g_before >= 0.40 && c.g_after <= 0.50,
            format!("levels 2/3 cross in [{:.2}, {:.2}]", c.g_before, c.g_after),
        ),
        None => (false, "no 2/3 crossing found".into()),
    })
}

fn quasidegeneracy() -> Outcome {
    let gap = |g: f64| -> Result<f64> { Ok(dress(&rabi(g, N_FOCK).build()?)?.0.gap(1, 0)) };
    let (hi, lo) = (gap(0.9)?, gap(0.1)?);
    let r = hi / lo;
    Ok((r < 0.05, format!("D10(0.9)={hi:.5} D10(0.1)={lo:.5} ratio={r:.4}")))
}

fn thermalization() -> Outcome {
    let mut dev: f64 = 0.0;
    let mut drift: f64 = 0.0;
    for m in &MARKERS {
        let a = source(m, 0.01, 0.01)?;
        let b = source(m, 0.03, 0.005)?;
        let cut = a.level_cut();
        let p = &a.state.populations()[..cut];
        let norm: f64 = p.iter().sum();
        let canonical = CMatrix::from_fn(cut, cut, |j, k| {
            C64::new(if j == k { p[j] / norm } else { 0.0 }, 0.0)
        });
        let ra = steady_state(&a.liouvillian)?.into_matrix();
        let rb = steady_state(&b.liouvillian)?.into_matrix();
        dev = dev.max((&ra - &canonical).iter().map(|z| z.norm()).fold(0.0, f64::max));
        drift = drift.max((&ra - &rb).iter().map(|z| z.norm()).fold(0.0, f64::max));
    }
    Ok((dev <= 1e-6 && drift <= 1e-6, format!("max |rho-rho_T|={dev:.2e} rate change={drift:.2e}")))
}

fn oscillation() -> Outcome {
    let s = source(&DIAMOND, GAMMA, GAMMA)?;
    let tau = linspace(0.0, 300.0, 6001);
    let trace = g2_tau(&s, &tau)?;
    let w = oscillation_frequency(&tau, &trace.values)?;
    let d12 = s.basis.gap(2, 1);
    let rel = (w - d12).abs() / d12;
    Ok((rel < 0.03, format!("extracted {w:.5} vs D12={d12:.5} (rel {rel:.2e})")))
}

fn cross_asymmetry() -> Outcome {
    let s = source(&DOT, GAMMA, GAMMA)?;
    let tau = [-0.01, 1.0 / GAMMA, 2.0 / GAMMA, 3.0 / GAMMA];
    let v = g2_cross_filtered(&s, &tau)?.values;
    let ok = v[0] < 1.0 && v[1..].iter().all(|&x| x > 2.0);
    Ok((
        ok,
        format!(
            "tau=0-: {:.3e}; tau=1,2,3/gamma: {:.3} {:.3} {:.3}",
            v[0], v[1], v[2], v[3]
        ),
    ))
}

fn spectrum_structure() -> Outcome {
    let omega = linspace(0.0, 2.0, 4001);
    let dw = omega[1] - omega[0];
    let mut by_t: Vec<&Marker> = MARKERS.iter().collect();
    by_t.sort_by(|a, b| a.t.total_cmp(&b.t));
    let mut heights = Vec::new();
    let mut fluxes = Vec::new();
    let mut worst_offset: f64 = 0.0;
    let mut widths = (0.0, 0.0);
    for m in &by_t {
        let s = source(m, GAMMA, GAMMA)?;
        let ev = SpectrumEvaluator::new(&s)?;
        let spec = ev.spectrum(&omega, Normalization::Raw);
        let cut = s.level_cut();
        let field = s.table.field();
        let gaps: Vec<f64> = (0..cut)
            .flat_map(|j| (j + 1..cut).map(move |k| (j, k)))
            .filter(|&(j, k)| field[(j, k)].norm() > 1e-6)
            .map(|(j, k)| s.basis.gap(k, j))
            .collect();
        for i in local_maxima(&spec.values, 1e-3) {
            let off = gaps.iter().map(|g| (g - omega[i]).abs()).fold(f64::INFINITY, f64::min);
            worst_offset = worst_offset.max(off);
        }
        heights.push(spec.values.iter().copied().fold(0.0, f64::max));
        fluxes.push(ev.flux());
        if m.name == DOT.name {
            widths = (ev.fwhm(s.basis.gap(1, 0))?, ev.fwhm(s.basis.gap(2, 1))?);
        }
    }
    let peaks_ok = worst_offset <= dw;
    let rising = heights.windows(2).all(|w| w[1] > w[0]);
    let narrow = widths.0 < widths.1;
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(", ");
    Ok((
        peaks_ok && rising && narrow,
        format!(
            "peak offset {worst_offset:.1e} (step {dw:.1e}); heights by T {}: {} [{}]; \
             flux by T: {}; dot fwhm10={:.2e} fwhm21={:.2e}",
            by_t.iter().map(|m| m.name).collect::<Vec<_>>().join(","),
            fmt(&heights),
            if rising { "increasing" } else { "not increasing" },
            fmt(&fluxes),
            widths.0,
            widths.1
        ),
    ))
}

fn property_suite() -> Outcome {
    let mut runner = TestRunner::deterministic();
    let draw = (0.05..1.0f64, 0.05..0.3f64, 0.002..0.05f64, 0.002..0.05f64);
    let (mut regression, mut trace, mut herm, mut balance, mut parity, mut doubling) =
        (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..20 {
        let (g, t, ga, gx) = draw.new_tree(&mut runner).expect("strategy").current();
        let spec = rabi(g, N_FOCK);
        let s = StationarySource::new(&spec.build()?, BathSpec::new(ga, gx, t)?, None)?;
        let direct = g2_zero(&s.basis, &s.table, &s.state, s.level_cut())?;
        let regressed = g2_tau(&s, &[0.0])?.values[0];
        regression = regression.max((direct - regressed).abs() / direct.max(1.0));

        let cut = s.level_cut();
        let probe = CMatrix::from_fn(cut, cut, |j, k| {
            C64::new(((j * 7 + k * 3) % 5) as f64 - 2.0, (j as f64 - k as f64) * 0.3)
        });
        let probe = &probe + probe.adjoint();
        let out = s.liouvillian.apply(&probe)?;
        trace = trace.max(out.trace().norm());
        herm = herm.max((&out - out.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max));

        for ch in all_rates(&s.basis, &s.table, &s.bath, cut, 1.0)? {
            for r in ch.rates.iter().filter(|r| r.rate > 0.0) {
                let boltzmann = (-r.gap / t).exp();
                balance = balance.max((r.upward() / r.downward() - boltzmann).abs());
            }
        }
        let p = s.basis.parities();
        for j in 0..s.basis.dim() {
            for k in 0..s.basis.dim() {
                if p[j] == p[k] {
                    parity = parity.max(s.table.field()[(j, k)].norm());
                }
            }
        }
        let check = check_truncation(&spec, t)?;
        doubling = doubling.max(check.g2_drift.unwrap_or(f64::INFINITY));
    }
    // A freshly built Liouvillian must also satisfy the same invariants.
    let s = source(&DOT, GAMMA, GAMMA)?;
    let channels = all_rates(&s.basis, &s.table, &s.bath, s.level_cut(), 1.0)?;
    let rebuilt = build_liouvillian(&s.basis, s.level_cut(), &channels)?;
    let same = rebuilt.matrix() == s.liouvillian.matrix();
    let ok = regression <= 1e-6
        && trace <= 1e-10
        && herm <= 1e-10
        && balance <= 1e-12
        && parity == 0.0
        && doubling < 1e-4
        && same;
    Ok((
        ok,
        format!(
            "20 draws: g2 regression {regression:.1e}, trace {trace:.1e}, hermiticity {herm:.1e}, \
             detailed balance {balance:.1e}, parity leak {parity:.1e}, doubling drift {doubling:.1e}, \
             deterministic rebuild {same}"
        ),
    ))
}

fn supplement() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for j in 2..=4 {
        let mut min = f64::INFINITY;
        for g in [0.3, 0.4, 0.5, 0.6] {
            for t in [0.05, 0.07] {
                min = min.min(thermal_g2(&ModelSpec::MultiTls(MultiTlsParams::identical(j, g, 16)), t)?);
            }
        }
        ok &= min < 1.0;
        parts.push(format!("{j}-TLS min g2={min:.3}"));
    }
    let two_mode = |g: f64| {
        ModelSpec::TwoMode(TwoModeParams {
            modes: [
                ModeParams { omega0: 1.0, g, n_fock: N_FOCK },
                ModeParams { omega0: 2.0, g: 2.0 * g, n_fock: 10 },
            ],
            omega_x: 1.0,
        })
    };
    let compare = |gs: &[f64], ts: &[f64]| -> Result<(usize, usize, f64)> {
        let (mut lower, mut total, mut worst) = (0, 0, f64::NEG_INFINITY);
        for &g in gs {
            for &t in ts {
                let (a, b) = (thermal_g2(&two_mode(g), t)?, thermal_g2(&rabi(g, N_FOCK), t)?);
                lower += usize::from(a < b);
                total += 1;
                worst = worst.max(a - b);
            }
        }
        Ok((lower, total, worst))
    };
    let (lower, total, worst) = compare(&[0.2, 0.3, 0.4, 0.5, 0.6], &[0.05, 0.07])?;
    ok &= lower == total;
    parts.push(format!(
        "two-mode below single-mode at {lower}/{total} spot points (max diff {worst:.3e})"
    ));
    let (wide, wide_total, _) = compare(&[0.1, 0.3, 0.5, 0.7, 0.9], &[0.07, 0.15])?;
    parts.push(format!("[wide grid, not gated: {wide}/{wide_total}]"));
    Ok((ok, parts.join("; ")))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("marker-regions", marker_regions),
        ("baseline-flatness", baseline_flatness),
        ("level-crossing", level_crossing),
        ("quasidegeneracy", quasidegeneracy),
        ("thermalization", thermalization),
        ("oscillation-frequency", oscillation),
        ("cross-correlation-asymmetry", cross_asymmetry),
        ("spectrum-structure", spectrum_structure),
        ("property-suite", property_suite),
        ("supplement", supplement),
    ];
    let mut failures = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let (ok, detail) = match f() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        failures += usize::from(!ok);
        println!("{} {}-{name}: {detail}", if ok { "PASS" } else { "FAIL" }, i + 1);
    }
    println!("{}/{} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
