//! Stage timing and peak-memory comparison of the three baking workflows.
//!
//! Each method runs on its own, one after another, so memory peaks never
//! overlap. With [`Isolation::Subprocess`] every method gets a fresh process
//! and its resident set is sampled from `/proc/<pid>/status` at 100 Hz.

use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::assets::{read_image, read_mesh, read_pointcloud, write_image, TexelGrid, TriangleMesh};
use crate::atlas::unwrap_per_triangle;
use crate::error::{Error, Result};
use crate::eval::baselines::bake_from_mesh_with;
use crate::eval::metrics::{rmse, Psnr};
use crate::eval::render::{render, render_surface, AnalyticSurface, VertexColorSurface};
use crate::manifest::{Reference, SceneManifest};
use crate::spatial::FaceGrid;
use crate::transfer::{bake_with, compute_vertex_payload, output_paths, write_outputs, BakeMode, BakeStats};

pub const SAMPLE_INTERVAL: Duration = Duration::from_millis(10);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Vertex payload interpolation on the low mesh.
    Lpm,
    /// Transfer from the dense colored mesh.
    Remesh,
    /// Point-cloud transfer.
    Ours,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Lpm, Method::Remesh, Method::Ours];

    pub fn name(self) -> &'static str {
        match self {
            Method::Lpm => "lpm",
            Method::Remesh => "remesh",
            Method::Ours => "ours",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method `{s}` (expected lpm, remesh or ours)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub wall_ms: f64,
    /// Process high-water mark at the end of the stage.
    pub peak_rss_bytes: u64,
}

/// What one method run reports about itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRun {
    pub method: Method,
    pub stages: Vec<StageRecord>,
    pub stats: BakeStats,
    /// Path prefix of the written albedo/normal/stats files.
    pub output_prefix: PathBuf,
}

impl MethodRun {
    pub fn total_ms(&self) -> f64 {
        self.stages.iter().find(|s| s.stage == "total").map_or(0.0, |s| s.wall_ms)
    }
}

/// Resident-set high-water mark of the calling process, from `getrusage`.
pub fn max_rss_bytes() -> u64 {
    // SAFETY: getrusage only writes into the zeroed struct we pass.
    unsafe {
        let mut ru: libc::rusage = std::mem::zeroed();
        if libc::getrusage(libc::RUSAGE_SELF, &mut ru) != 0 {
            return 0;
        }
        ru.ru_maxrss.max(0) as u64 * 1024
    }
}

/// Current resident set of `pid` in bytes, or None once the process is gone.
pub fn current_rss_bytes(pid: u32) -> Option<u64> {
    let text = fs::read_to_string(format!("/proc/{pid}/status")).ok()?;
    let line = text.lines().find(|l| l.starts_with("VmRSS:"))?;
    let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb * 1024)
}

struct Stopwatch {
    start: Instant,
    last: Instant,
    stages: Vec<StageRecord>,
}

impl Stopwatch {
    fn new() -> Self {
        let now = Instant::now();
        Stopwatch {
            start: now,
            last: now,
            stages: Vec::new(),
        }
    }

    fn lap(&mut self, stage: &str) {
        let now = Instant::now();
        self.stages.push(StageRecord {
            stage: stage.into(),
            wall_ms: (now - self.last).as_secs_f64() * 1e3,
            peak_rss_bytes: max_rss_bytes(),
        });
        self.last = now;
    }

    fn finish(mut self) -> Vec<StageRecord> {
        self.stages.push(StageRecord {
            stage: "total".into(),
            wall_ms: self.start.elapsed().as_secs_f64() * 1e3,
            peak_rss_bytes: max_rss_bytes(),
        });
        self.stages
    }
}

/// Runs one method end to end on the manifest's scene and writes its maps
/// to `out_dir/<method>_{albedo,normal}.png`.
///
/// Every method reads the scan, since it is the input of both workflows;
/// the dense mesh stands in for a reconstruction that is not performed here.
pub fn run_method(method: Method, manifest: &SceneManifest, base: &Path, out_dir: &Path) -> Result<MethodRun> {
    let cfg = &manifest.cfg;
    let mut sw = Stopwatch::new();

    let mut cloud = read_pointcloud(SceneManifest::resolve(base, &manifest.cloud, "cloud")?)?;
    cloud.sort_spatially();
    let mut low = read_mesh(SceneManifest::resolve(base, &manifest.low_mesh, "low_mesh")?)?;
    let high = match method {
        Method::Remesh => {
            let rel = manifest.high_mesh.as_ref().ok_or_else(|| Error::Manifest("high_mesh".into()))?;
            Some(read_mesh(SceneManifest::resolve(base, rel, "high_mesh")?)?)
        }
        _ => None,
    };
    sw.lap("load");

    unwrap_per_triangle(&low, cfg.resolution, cfg.gutter)?.apply_to(&mut low);
    sw.lap("unwrap");

    let out = match method {
        Method::Lpm => bake_with(&low, &cloud, None, cfg, BakeMode::VertexOnly)?,
        Method::Ours => bake_with(&low, &cloud, None, cfg, BakeMode::PointTransfer)?,
        Method::Remesh => {
            let high = high.as_ref().expect("loaded above");
            let grid = cfg.build_grid(&cloud)?;
            let payload = compute_vertex_payload(&low, &cloud, &grid, cfg);
            drop(grid);
            let faces = FaceGrid::build(high)?;
            bake_from_mesh_with(high, &faces, &low, &payload, cfg)?
        }
    };
    sw.lap("bake");

    let prefix = out_dir.join(method.name());
    write_outputs(&out, &prefix)?;
    sw.lap("write");

    Ok(MethodRun {
        method,
        stages: sw.finish(),
        stats: out.stats,
        output_prefix: prefix,
    })
}

/// How each method is executed.
#[derive(Debug, Clone)]
pub enum Isolation {
    /// Same process; memory figures are then shared high-water marks.
    InProcess,
    /// `program args… <method> <manifest> <out_dir>` must call [`run_method`]
    /// and print the [`MethodRun`] as JSON on its last stdout line.
    Subprocess { program: PathBuf, args: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameScore {
    pub camera: usize,
    pub rmse: f64,
    pub psnr: Psnr,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodReport {
    pub method: Method,
    pub stages: Vec<StageRecord>,
    pub total_ms: f64,
    /// Largest resident set seen by the sampler.
    pub sampled_peak_rss_bytes: u64,
    pub rss_samples: usize,
    /// Kernel high-water mark reported by the run itself.
    pub max_rss_bytes: u64,
    pub frames: Vec<FrameScore>,
    /// RMSE and PSNR pooled over all camera frames.
    pub rmse: f64,
    pub psnr: Psnr,
    pub stats: BakeStats,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileReport {
    pub reference: Reference,
    pub point_count: usize,
    pub low_faces: usize,
    pub high_faces: Option<usize>,
    pub methods: Vec<MethodReport>,
}

impl ProfileReport {
    pub fn method(&self, m: Method) -> Option<&MethodReport> {
        self.methods.iter().find(|r| r.method == m)
    }

    /// One row per method and stage; the `total` row carries the sampled peak.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("method,stage,wall_ms,peak_rss_bytes\n");
        for m in &self.methods {
            for st in &m.stages {
                let rss = if st.stage == "total" { m.sampled_peak_rss_bytes.max(st.peak_rss_bytes) } else { st.peak_rss_bytes };
                s += &format!("{},{},{:.3},{}\n", m.method, st.stage, st.wall_ms, rss);
            }
        }
        s
    }
}

struct Sampler {
    stop: Arc<AtomicBool>,
    handle: thread::JoinHandle<(u64, usize)>,
}

impl Sampler {
    fn start(pid: u32) -> Self {
        let stop = Arc::new(AtomicBool::new(false));
        let flag = stop.clone();
        let handle = thread::spawn(move || {
            let (mut peak, mut n) = (0u64, 0usize);
            while !flag.load(Ordering::Relaxed) {
                match current_rss_bytes(pid) {
                    Some(b) => {
                        peak = peak.max(b);
                        n += 1;
                    }
                    None => break,
                }
                thread::sleep(SAMPLE_INTERVAL);
            }
            (peak, n)
        });
        Sampler { stop, handle }
    }

    fn finish(self) -> (u64, usize) {
        self.stop.store(true, Ordering::Relaxed);
        self.handle.join().unwrap_or((0, 0))
    }
}

fn run_isolated(
    method: Method,
    manifest: &SceneManifest,
    manifest_path: &Path,
    out_dir: &Path,
    isolation: &Isolation,
) -> Result<(MethodRun, u64, usize)> {
    match isolation {
        Isolation::InProcess => {
            let sampler = Sampler::start(std::process::id());
            let base = manifest_path.parent().unwrap_or(Path::new("."));
            let run = run_method(method, manifest, base, out_dir);
            let (peak, n) = sampler.finish();
            Ok((run?, peak, n))
        }
        Isolation::Subprocess { program, args } => {
            let child = Command::new(program)
                .args(args)
                .arg(method.name())
                .arg(manifest_path)
                .arg(out_dir)
                .stdin(Stdio::null())
                .stdout(Stdio::piped())
                .stderr(Stdio::piped())
                .spawn()
                .map_err(|e| Error::Subprocess(format!("{}: {e}", program.display())))?;
            let sampler = Sampler::start(child.id());
            let output = child
                .wait_with_output()
                .map_err(|e| Error::Subprocess(format!("{method}: {e}")))?;
            let (peak, n) = sampler.finish();
            if !output.status.success() {
                let err = String::from_utf8_lossy(&output.stderr);
                return Err(Error::Subprocess(format!("{method} run failed ({}): {}", output.status, err.trim())));
            }
            let stdout = String::from_utf8_lossy(&output.stdout);
            let last = stdout.lines().rev().find(|l| !l.trim().is_empty()).unwrap_or("");
            let run: MethodRun = serde_json::from_str(last)
                .map_err(|e| Error::Subprocess(format!("{method}: unreadable run report: {e}")))?;
            Ok((run, peak, n))
        }
    }
}

fn pooled(frames: &[(TexelGrid, TexelGrid)]) -> Result<f64> {
    let mut sum = 0.0;
    let mut n = 0.0;
    for (a, b) in frames {
        let r = rmse(a, b)?;
        sum += r * r * a.data.len() as f64;
        n += a.data.len() as f64;
    }
    Ok(if n == 0.0 { 0.0 } else { (sum / n).sqrt() })
}

/// Runs all three methods on the manifest's scene, renders every method's
/// result from every camera and scores it against the reference frames.
/// Writes `report.csv`, `summary.json`, per-method maps under `maps/` and
/// frames under `frames/` into `out_dir`.
pub fn profile_pipeline(manifest_path: &Path, out_dir: &Path, isolation: &Isolation) -> Result<ProfileReport> {
    let manifest = SceneManifest::load(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let maps_dir = out_dir.join("maps");
    let frames_dir = out_dir.join("frames");
    for d in [&maps_dir, &frames_dir] {
        fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }

    let mut low = read_mesh(SceneManifest::resolve(&base, &manifest.low_mesh, "low_mesh")?)?;
    unwrap_per_triangle(&low, manifest.cfg.resolution, manifest.cfg.gutter)?.apply_to(&mut low);
    let high: Option<TriangleMesh> = match &manifest.high_mesh {
        Some(rel) => Some(read_mesh(SceneManifest::resolve(&base, rel, "high_mesh")?)?),
        None => None,
    };

    let reference: Vec<TexelGrid> = manifest
        .cameras
        .iter()
        .map(|cam| match manifest.reference {
            Reference::Analytic => {
                let kind = manifest.scene.ok_or_else(|| Error::Manifest("scene".into()))?;
                render_surface(&low, &AnalyticSurface::new(&low, kind), cam, manifest.light_dir).map(|f| f.color)
            }
            Reference::DenseRender => {
                let high = high.as_ref().ok_or_else(|| Error::Manifest("high_mesh".into()))?;
                render_surface(high, &VertexColorSurface::new(high)?, cam, manifest.light_dir).map(|f| f.color)
            }
        })
        .collect::<Result<_>>()?;
    for (i, f) in reference.iter().enumerate() {
        write_image(f, frames_dir.join(format!("reference_cam{i}.png")))?;
    }

    let mut methods = Vec::new();
    for method in Method::ALL {
        let (run, sampled, samples) = run_isolated(method, &manifest, manifest_path, &maps_dir, isolation)?;
        let [albedo, normal, _] = output_paths(&run.output_prefix);
        let texture = read_image(&albedo)?;
        let normal_map = read_image(&normal)?;
        let mut pairs = Vec::new();
        let mut frames = Vec::new();
        for (i, cam) in manifest.cameras.iter().enumerate() {
            let f = render(&low, &texture, Some(&normal_map), cam, manifest.light_dir)?.color;
            write_image(&f, frames_dir.join(format!("{method}_cam{i}.png")))?;
            let r = rmse(&f, &reference[i])?;
            frames.push(FrameScore {
                camera: i,
                rmse: r,
                psnr: Psnr::from_rmse(r),
            });
            pairs.push((f, reference[i].clone()));
        }
        let r = pooled(&pairs)?;
        let total = run.stages.iter().find(|s| s.stage == "total");
        methods.push(MethodReport {
            method,
            total_ms: run.total_ms(),
            sampled_peak_rss_bytes: sampled,
            rss_samples: samples,
            max_rss_bytes: total.map_or(0, |s| s.peak_rss_bytes),
            stages: run.stages,
            frames,
            rmse: r,
            psnr: Psnr::from_rmse(r),
            stats: run.stats,
        });
    }

    let report = ProfileReport {
        reference: manifest.reference,
        point_count: manifest.point_count,
        low_faces: low.faces.len(),
        high_faces: high.as_ref().map(|h| h.faces.len()),
        methods,
    };
    let csv = out_dir.join("report.csv");
    fs::write(&csv, report.to_csv()).map_err(|e| Error::io(&csv, e))?;
    let json = out_dir.join("summary.json");
    let mut f = fs::File::create(&json).map_err(|e| Error::io(&json, e))?;
    serde_json::to_writer_pretty(&mut f, &report)?;
    writeln!(f).map_err(|e| Error::io(&json, e))?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{synth_scene, write_scene, SceneKind};

    #[test]
    fn method_names_roundtrip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!(matches!("poisson".parse::<Method>(), Err(Error::Config(_))));
    }

    #[test]
    fn rss_readers() {
        let now = current_rss_bytes(std::process::id()).unwrap();
        assert!(now > 0);
        assert!(max_rss_bytes() >= now / 2);
        assert_eq!(current_rss_bytes(u32::MAX - 1), None);
    }

    #[test]
    fn tiny_scene_in_process() {
        let dir = tempfile::tempdir().unwrap();
        let scene = synth_scene(SceneKind::CheckerPlane, 5000, 0.0, 4).unwrap();
        let mut m = write_scene(&scene, dir.path()).unwrap();
        m.cfg.resolution = 128;
        for c in &mut m.cameras {
            c.width = 64;
            c.height = 64;
        }
        let path = dir.path().join("manifest.json");
        m.write(&path).unwrap();
        let out = dir.path().join("report");
        let rep = profile_pipeline(&path, &out, &Isolation::InProcess).unwrap();
        assert_eq!(rep.methods.len(), 3);
        for r in &rep.methods {
            let names: Vec<_> = r.stages.iter().map(|s| s.stage.as_str()).collect();
            assert_eq!(names, ["load", "unwrap", "bake", "write", "total"]);
            assert!(r.stages.iter().all(|s| s.wall_ms > 0.0), "{:?}", r.stages);
            assert!(r.sampled_peak_rss_bytes > 0 && r.rss_samples > 0);
            assert_eq!(r.frames.len(), 2);
        }
        let csv = fs::read_to_string(out.join("report.csv")).unwrap();
        assert_eq!(csv.lines().count(), 1 + 3 * 5);
        assert!(csv.starts_with("method,stage,wall_ms,peak_rss_bytes\n"));
        for m in Method::ALL {
            for i in 0..2 {
                assert!(out.join("frames").join(format!("{m}_cam{i}.png")).is_file());
            }
        }
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
        assert_eq!(v["methods"].as_array().unwrap().len(), 3);

        // quality columns do not depend on timing
        let again = profile_pipeline(&path, &dir.path().join("again"), &Isolation::InProcess).unwrap();
        for (a, b) in rep.methods.iter().zip(&again.methods) {
            assert_eq!(a.frames, b.frames);
        }
        let ours = rep.method(Method::Ours).unwrap().psnr.db();
        let lpm = rep.method(Method::Lpm).unwrap().psnr.db();
        assert!(ours > lpm, "{ours} vs {lpm}");
    }

    #[test]
    fn missing_high_mesh_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let scene = synth_scene(SceneKind::CheckerPlane, 1000, 0.0, 4).unwrap();
        write_scene(&scene, dir.path()).unwrap();
        fs::remove_file(dir.path().join("high.obj")).unwrap();
        let err = profile_pipeline(&dir.path().join("manifest.json"), &dir.path().join("r"), &Isolation::InProcess).unwrap_err();
        assert!(matches!(&err, Error::Manifest(f) if f.starts_with("high_mesh")), "{err}");
    }
}
