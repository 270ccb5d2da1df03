//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use isoflex::cli_io::report::trivial_residual;
use isoflex::cli_io::{cmd_pde_check, Settings, WField};
use isoflex::diffgeo::{gauss_curvature_graph, CurvatureDenominator, PeriodicField};
use isoflex::modes::{
    analyze_modes, sym_norm, KernelOptions, ModeSet, DEFAULT_RANK_TOL, DEFAULT_TOL_MACRO,
};
use isoflex::reciprocity::{consistent_conventions, verify, Convention, ReciprocityReport, Verdict};
use isoflex::rigidity::{assemble, AnsatzLayout};
use isoflex::surface_gen::{catalog, lookup, sample, PeriodicMesh, SurfaceSpec};

type Outcome = Result<String, String>;

const THEOREM_PRESETS: [&str; 6] = ["plane", "sine1d", "trianglewave1d", "sumsep", "eggbox_smooth", "miura"];
const RATIO_PRESETS: [&str; 3] = ["sumsep", "sumsep_r2", "sumsep_r4"];
const GRIDS: [usize; 3] = [8, 16, 32];

struct Run {
    mesh: PeriodicMesh,
    set: ModeSet,
    reciprocity: ReciprocityReport,
    seconds: f64,
}

#[derive(Default)]
struct Cache {
    runs: BTreeMap<(String, usize), Run>,
}

impl Cache {
    fn get(&mut self, name: &str, n: usize) -> Result<&Run, String> {
        let key = (name.to_owned(), n);
        if !self.runs.contains_key(&key) {
            let spec = lookup(name).ok_or_else(|| format!("no preset {name}"))?;
            let mesh = sample(&spec, n, n).map_err(|e| e.to_string())?;
            let t = Instant::now();
            let (_, set) = analyze_modes(&mesh, &KernelOptions::default(), DEFAULT_TOL_MACRO)
                .map_err(|e| format!("{name} {n}x{n}: {e}"))?;
            let seconds = t.elapsed().as_secs_f64();
            let reciprocity = verify(&set);
            self.runs.insert(
                key.clone(),
                Run {
                    mesh,
                    set,
                    reciprocity,
                    seconds,
                },
            );
        }
        Ok(&self.runs[&key])
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rel_abs(v: f64, scale: f64) -> f64 {
    if scale == 0.0 {
        v.abs()
    } else {
        v.abs() / scale
    }
}

fn c1_trivial() -> Outcome {
    let mut worst = 0.0_f64;
    let mut slowest = 0.0_f64;
    let mut meshes: Vec<(String, PeriodicMesh)> = catalog()
        .into_iter()
        .map(|e| (format!("{} 16x16", e.name), sample(&e.spec, 16, 16).unwrap()))
        .collect();
    meshes.push(("miura natural cell".into(), sample(&lookup("miura").unwrap(), 2, 2).unwrap()));
    for (label, mesh) in &meshes {
        let t = Instant::now();
        let system = assemble(mesh).map_err(|e| e.to_string())?;
        let r = trivial_residual(&system, mesh);
        let dt = t.elapsed().as_secs_f64();
        ensure(r <= 1e-12, || format!("{label}: residual {r:e}"))?;
        ensure(dt < 1.0, || format!("{label}: {dt:.2} s"))?;
        worst = worst.max(r);
        slowest = slowest.max(dt);
    }
    Ok(format!(
        "{} meshes, max residual {worst:.1e}, slowest {slowest:.3} s",
        meshes.len()
    ))
}

fn c2_kernel(cache: &mut Cache) -> Outcome {
    let mut lines = Vec::new();
    let mut slowest = (String::new(), 0.0);
    for e in catalog() {
        let r = cache.get(e.name, 32)?;
        ensure(r.set.kernel_dim >= 3, || format!("{}: kernel {}", e.name, r.set.kernel_dim))?;
        ensure(r.seconds < 10.0, || format!("{}: {:.2} s", e.name, r.seconds))?;
        if r.seconds > slowest.1 {
            slowest = (e.name.to_owned(), r.seconds);
        }
        lines.push(format!("{}={}", e.name, r.set.kernel_dim));
    }
    Ok(format!(
        "32x32 kernels {}; slowest {} {:.2} s",
        lines.join(" "),
        slowest.0,
        slowest.1
    ))
}

fn c3_plane(cache: &mut Cache) -> Outcome {
    let r = cache.get("plane", 8)?;
    ensure(r.set.membrane().count() == 0 && r.set.strain_set.is_empty(), || {
        "plane has membrane modes".into()
    })?;
    ensure(r.set.curvature_set.len() == 3, || {
        format!("curvature set has rank {}", r.set.curvature_set.len())
    })?;
    let layout = AnsatzLayout::new(r.mesh.vertex_count());
    let mut worst = 0.0_f64;
    for m in r.set.flexure() {
        let chi = sym_norm(m.macro_data.chi);
        let nonchi = m.vector[..layout.chi(0)].iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        worst = worst.max(nonchi / chi);
    }
    ensure(worst <= 1e-10, || format!("phi/G reach {worst:e}"))?;
    Ok(format!("strain set empty, 3 curvature directions, max |phi|,|G| = {worst:.1e}"))
}

fn c4_sine(cache: &mut Cache) -> Outcome {
    let r = cache.get("sine1d", 16)?;
    let good_membrane = r.set.membrane().any(|m| {
        let e = m.macro_data.e;
        let n = sym_norm(e);
        e[0].abs() > 0.0 && e[1].abs() <= 1e-8 * n && e[2].abs() <= 1e-8 * n
    });
    ensure(good_membrane, || "no membrane mode with E = (E11, 0, 0)".into())?;
    let mut worst = 0.0_f64;
    for m in r.set.flexure() {
        worst = worst.max(rel_abs(m.macro_data.chi[1], sym_norm(m.macro_data.chi)));
    }
    ensure(worst <= 1e-8, || format!("chi22 reaches {worst:e}"))?;
    ensure(r.set.flexure().any(|m| m.macro_data.chi[0].abs() > 0.0), || "no chi11 mode".into())?;
    Ok(format!("membrane E ~ (1,0,0), max |chi22|/|chi| = {worst:.1e}"))
}

fn c5_sumsep(cache: &mut Cache) -> Outcome {
    let r = cache.get("sumsep", 16)?;
    ensure(r.set.flexure().any(|m| m.macro_data.chi[2].abs() > 1e-8), || "no twist mode".into())?;
    let mut worst = 0.0_f64;
    for m in r.set.membrane() {
        worst = worst.max(rel_abs(m.macro_data.e[2], sym_norm(m.macro_data.e)));
    }
    ensure(worst <= 1e-8, || format!("membrane E12 reaches {worst:e}"))?;
    let settings = Settings {
        rank_tol: DEFAULT_RANK_TOL,
        tol_macro: DEFAULT_TOL_MACRO,
    };
    let pde = cmd_pde_check(&lookup("sumsep").unwrap(), WField::Xy, 16, settings).map_err(|e| e.to_string())?;
    let rms = pde.levels.iter().map(|l| l.rms).fold(0.0, f64::max);
    ensure(rms <= 1e-12, || format!("w = xy residual {rms:e}"))?;
    Ok(format!("twist mode present, max |E12|/|E| = {worst:.1e}, w = xy RMS {rms:.1e}"))
}

fn c6_miura(cache: &mut Cache) -> Outcome {
    let mut worst = 0.0_f64;
    for n in [2, 8] {
        let r = cache.get("miura", n)?;
        ensure(r.set.flexure().any(|m| m.macro_data.chi[2].abs() > 1e-8), || {
            format!("n={n}: no twist mode")
        })?;
        ensure(r.set.membrane().count() > 0, || format!("n={n}: no membrane mode"))?;
        for m in r.set.membrane() {
            worst = worst.max(rel_abs(m.macro_data.e[2], sym_norm(m.macro_data.e)));
        }
    }
    ensure(worst <= 1e-8, || format!("membrane E12 reaches {worst:e}"))?;
    Ok(format!("twist mode present, max |E12|/|E| = {worst:.1e}"))
}

fn residual(r: &ReciprocityReport, c: Convention) -> f64 {
    match c {
        Convention::Raw => r.max_raw_residual,
        Convention::Normalized => r.max_normalized_residual,
    }
}

fn c7_theorem(cache: &mut Cache) -> Outcome {
    let t = Instant::now();
    let mut verdicts = Vec::new();
    for name in THEOREM_PRESETS {
        for n in GRIDS {
            verdicts.push((name, n, cache.get(name, n)?.reciprocity.verdict));
        }
    }
    let mut ratio_verdicts = Vec::new();
    for name in RATIO_PRESETS {
        for n in GRIDS {
            ratio_verdicts.push(cache.get(name, n)?.reciprocity.verdict);
        }
    }
    let all: Vec<Verdict> = verdicts.iter().map(|v| v.2).chain(ratio_verdicts.iter().copied()).collect();
    let conventions = consistent_conventions(&all);
    let Some(&convention) = conventions.last() else {
        return Err(format!("no convention holds everywhere: {verdicts:?} / ratios {ratio_verdicts:?}"));
    };
    let ratio = consistent_conventions(&ratio_verdicts);
    ensure(ratio.contains(&convention), || format!("ratio sweep disagrees: {ratio_verdicts:?}"))?;
    let mut worst = 0.0_f64;
    let mut compute = 0.0;
    for name in THEOREM_PRESETS.iter().chain(&RATIO_PRESETS) {
        for n in GRIDS {
            let r = cache.get(name, n)?;
            worst = worst.max(residual(&r.reciprocity, convention));
            compute += r.seconds;
        }
    }
    ensure(worst <= 1e-8, || format!("residual {worst:e}"))?;
    let elapsed = t.elapsed().as_secs_f64().max(compute);
    ensure(elapsed < 300.0, || format!("sweep took {elapsed:.1} s"))?;
    Ok(format!(
        "verdict convention {convention:?} (holding: {conventions:?}), max residual {worst:.1e}, sweep {elapsed:.1} s"
    ))
}

fn c8_poisson(cache: &mut Cache) -> Outcome {
    let mut count = 0;
    let mut defect = 0.0_f64;
    let mut offdiag = 0.0_f64;
    for name in THEOREM_PRESETS.iter().chain(&RATIO_PRESETS) {
        for n in GRIDS {
            let r = cache.get(name, n)?;
            for p in &r.reciprocity.poisson {
                let m = r.set.mode(p.membrane).map_err(|e| e.to_string())?;
                count += 1;
                defect = defect.max(p.defect);
                offdiag = offdiag.max(rel_abs(p.e_principal[2], sym_norm(m.macro_data.e_bar)));
            }
        }
    }
    ensure(count > 0, || "no eligible pairs".into())?;
    ensure(defect <= 1e-6, || format!("|nu_in + nu_out| reaches {defect:e}"))?;
    ensure(offdiag <= 1e-12, || format!("rotated E12 reaches {offdiag:e}"))?;
    Ok(format!(
        "{count} pairs, max |nu_in + nu_out| = {defect:.1e}, max |E'12|/|E| = {offdiag:.1e}"
    ))
}

fn eggbox_error(n: usize) -> Result<f64, String> {
    let spec = lookup("eggbox_smooth").unwrap();
    let a = match &spec {
        SurfaceSpec::Builtin { params, .. } => params.get("amplitude").copied().unwrap_or(1.0),
        _ => unreachable!(),
    };
    let mesh = sample(&spec, n, n).map_err(|e| e.to_string())?;
    let f = PeriodicField::heights_of(&mesh).map_err(|e| e.to_string())?;
    let k = gauss_curvature_graph(&f, CurvatureDenominator::Standard);
    let exact = PeriodicField::from_fn(TAU, TAU, n, n, |x, y| {
        let z = a * x.sin() * y.sin();
        let fx = a * x.cos() * y.sin();
        let fy = a * x.sin() * y.cos();
        let fxy = a * x.cos() * y.cos();
        (z * z - fxy * fxy) / (1.0 + fx * fx + fy * fy).powi(2)
    })
    .map_err(|e| e.to_string())?;
    Ok(k.values.iter().zip(&exact.values).fold(0.0_f64, |m, (u, v)| m.max((u - v).abs())))
}

fn c9_convergence() -> Outcome {
    let e16 = eggbox_error(16)?;
    let e32 = eggbox_error(32)?;
    let order = (e16 / e32).log2();
    ensure(order >= 1.8, || format!("order {order:.3} (errors {e16:e}, {e32:e})"))?;
    Ok(format!("max errors {e16:.2e} -> {e32:.2e}, order {order:.3}"))
}

fn analyze_cli(args: &[&str], out: &Path) -> Result<Vec<u8>, String> {
    let status = Command::new(env!("CARGO_BIN_EXE_isoflex"))
        .arg("analyze")
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(status.status.success(), || {
        format!("analyze {args:?} exited {:?}", status.status.code())
    })?;
    std::fs::read(out.join("report.json")).map_err(|e| e.to_string())
}

fn c10_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = |s: &str| dir.path().join(s);
    let args = ["--surface", "sumsep", "--n1", "16", "--n2", "16"];
    let a = analyze_cli(&args, &p("a"))?;
    let b = analyze_cli(&args, &p("b"))?;
    ensure(a == b, || "repeated reports differ".into())?;
    for f in ["mesh.json", "modes.json", "config.json", "pairing.csv"] {
        let x = std::fs::read(p("a").join(f)).map_err(|e| e.to_string())?;
        let y = std::fs::read(p("b").join(f)).map_err(|e| e.to_string())?;
        ensure(x == y, || format!("repeated {f} differs"))?;
    }
    let config = p("a").join("config.json");
    let c = analyze_cli(&["--config", config.to_str().unwrap()], &p("c"))?;
    ensure(c == a, || "config re-ingest changed the report".into())?;
    let mesh = p("a").join("mesh.json");
    let d = analyze_cli(&["--surface", mesh.to_str().unwrap()], &p("d"))?;
    ensure(d == a, || "mesh re-ingest changed the report".into())?;
    Ok(format!("{} byte report reproduced by rerun, config and mesh re-ingest", a.len()))
}

fn main() {
    let mut cache = Cache::default();
    let criteria: Vec<(&str, Box<dyn FnOnce(&mut Cache) -> Outcome>)> = vec![
        ("trivial-mode exactness", Box::new(|_| c1_trivial())),
        ("kernel counting", Box::new(c2_kernel)),
        ("plane", Box::new(c3_plane)),
        ("sine1d", Box::new(c4_sine)),
        ("sumsep", Box::new(c5_sumsep)),
        ("miura", Box::new(c6_miura)),
        ("reciprocity theorem", Box::new(c7_theorem)),
        ("Poisson identity", Box::new(c8_poisson)),
        ("curvature convergence", Box::new(|_| c9_convergence())),
        ("determinism and round-trip", Box::new(|_| c10_determinism())),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.into_iter().enumerate() {
        match run(&mut cache) {
            Ok(detail) => println!("criterion {} ({name}): PASS: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} ({name}): FAIL: {detail}", i + 1);
            }
        }
    }
    println!("{} of 10 criteria passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
