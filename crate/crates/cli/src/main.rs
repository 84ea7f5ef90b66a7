use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pcbake::assets::{read_image, read_mesh, read_pointcloud, write_image, write_mesh};
use pcbake::atlas::unwrap_per_triangle;
use pcbake::error::ErrorClass;
use pcbake::eval::{self, Camera, Isolation, Method};
use pcbake::manifest::SceneManifest;
use pcbake::synth::{synth_scene, write_scene, SceneKind};
use pcbake::transfer::{bake_all, write_outputs, BakeConfig, BakeOutput};
use pcbake::{Error, Result, UnitVec3, Vec3};

#[derive(Parser)]
#[command(name = "pcbake", version, about = "Bake point-cloud color and normals onto low-polygon meshes")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Give every face its own chart in a packed UV atlas.
    Unwrap {
        mesh: PathBuf,
        #[arg(long, default_value_t = 1024)]
        resolution: u32,
        #[arg(long, default_value_t = 2)]
        gutter: u32,
        #[arg(short)]
        o: PathBuf,
    },
    /// Bake albedo and normal maps from a point cloud.
    Bake {
        cloud: PathBuf,
        mesh: PathBuf,
        #[command(flatten)]
        opts: BakeOpts,
    },
    /// Bake by interpolating per-vertex attributes only.
    BakeLpm {
        cloud: PathBuf,
        mesh: PathBuf,
        #[command(flatten)]
        opts: BakeOpts,
    },
    /// Bake by transferring from a dense vertex-colored mesh.
    BakeRemesh {
        high: PathBuf,
        low: PathBuf,
        #[command(flatten)]
        opts: BakeOpts,
    },
    /// Render a textured mesh to a PNG.
    Render {
        mesh: PathBuf,
        albedo: PathBuf,
        normal: Option<PathBuf>,
        /// Eye position, look-at point and vertical field of view in degrees.
        #[arg(long, value_name = "x,y,z,lx,ly,lz,fov")]
        camera: String,
        #[arg(long, value_name = "WxH", default_value = "512x512")]
        size: String,
        #[arg(long, value_name = "x,y,z", default_value = "0,0,1")]
        up: String,
        /// Direction the light travels.
        #[arg(long, value_name = "x,y,z")]
        light: Option<String>,
        #[arg(short)]
        o: PathBuf,
    },
    /// Print RMSE and PSNR between two images.
    Compare { a: PathBuf, b: PathBuf },
    /// Generate a synthetic scene and its manifest.
    Synth {
        /// checker-plane, stripe-sphere or step-wall
        kind: String,
        #[arg(long, default_value_t = 1_000_000)]
        points: usize,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short)]
        o: PathBuf,
    },
    /// Time and compare the three baking workflows on a scene.
    Bench {
        manifest: PathBuf,
        #[arg(short)]
        o: PathBuf,
    },
    #[command(hide = true)]
    RunMethod {
        method: String,
        manifest: PathBuf,
        out_dir: PathBuf,
    },
}

#[derive(Args)]
struct BakeOpts {
    #[arg(long, default_value_t = 4.0)]
    d_max: f64,
    #[arg(long, default_value_t = 120.0)]
    angle_max: f64,
    #[arg(long, default_value_t = 1024)]
    resolution: u32,
    #[arg(long, default_value_t = 2)]
    gutter: u32,
    /// Fill the normal map from interpolated vertex normals only.
    #[arg(long)]
    no_normals: bool,
    /// Output path prefix; writes <prefix>_albedo.png, _normal.png and _stats.json.
    #[arg(short)]
    o: PathBuf,
}

impl BakeOpts {
    fn config(&self) -> BakeConfig {
        BakeConfig {
            d_max: self.d_max,
            angle_max_deg: self.angle_max,
            resolution: self.resolution,
            gutter: self.gutter,
            bake_normals: !self.no_normals,
            ..Default::default()
        }
    }
}

fn floats(s: &str, n: usize, what: &str) -> Result<Vec<f64>> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Config(format!("{what}: expected {n} comma-separated numbers, got `{s}`")))?;
    if v.len() != n || v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Config(format!("{what}: expected {n} comma-separated numbers, got `{s}`")));
    }
    Ok(v)
}

fn parse_size(s: &str) -> Result<(u32, u32)> {
    let bad = || Error::Config(format!("size: expected WxH, got `{s}`"));
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    let w: u32 = w.parse().map_err(|_| bad())?;
    let h: u32 = h.parse().map_err(|_| bad())?;
    if w == 0 || h == 0 {
        return Err(bad());
    }
    Ok((w, h))
}

fn direction(s: &str, what: &str) -> Result<UnitVec3> {
    let v = floats(s, 3, what)?;
    Vec3::new(v[0], v[1], v[2])
        .normalized()
        .ok_or_else(|| Error::Config(format!("{what}: zero-length direction")))
}

fn report_bake(out: &BakeOutput, prefix: &Path) -> Result<()> {
    let paths = write_outputs(out, prefix)?;
    let s = &out.stats;
    println!(
        "covered={} dilated={} transferred={} fallback={} total_ms={:.1}",
        s.covered_texels, s.dilated_texels, s.points_transferred, s.fallback_texels, s.timings.total_ms
    );
    for p in paths {
        println!("{}", p.display());
    }
    Ok(())
}

fn run(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Unwrap { mesh, resolution, gutter, o } => {
            let mut m = read_mesh(&mesh)?;
            let atlas = unwrap_per_triangle(&m, resolution, gutter)?;
            atlas.apply_to(&mut m);
            write_mesh(&m, &o)?;
            println!("faces={} texels_per_unit={:.3}", m.faces.len(), atlas.texels_per_unit);
        }
        Cmd::Bake { cloud, mesh, opts } => {
            let (mut c, m) = (read_pointcloud(&cloud)?, read_mesh(&mesh)?);
            c.sort_spatially();
            report_bake(&bake_all(&m, &c, &opts.config())?, &opts.o)?;
        }
        Cmd::BakeLpm { cloud, mesh, opts } => {
            let (mut c, m) = (read_pointcloud(&cloud)?, read_mesh(&mesh)?);
            c.sort_spatially();
            report_bake(&eval::bake_lpm(&m, &c, &opts.config())?, &opts.o)?;
        }
        Cmd::BakeRemesh { high, low, opts } => {
            let (h, l) = (read_mesh(&high)?, read_mesh(&low)?);
            report_bake(&eval::bake_from_mesh(&h, &l, &opts.config())?, &opts.o)?;
        }
        Cmd::Render { mesh, albedo, normal, camera, size, up, light, o } => {
            let c = floats(&camera, 7, "camera")?;
            let (width, height) = parse_size(&size)?;
            let cam = Camera {
                position: Vec3::new(c[0], c[1], c[2]),
                look_at: Vec3::new(c[3], c[4], c[5]),
                up: direction(&up, "up")?,
                vertical_fov_deg: c[6],
                width,
                height,
                ..Camera::default()
            };
            let light = match light {
                Some(l) => direction(&l, "light")?,
                None => SceneKind::light_dir(),
            };
            let m = read_mesh(&mesh)?;
            let tex = read_image(&albedo)?;
            let nm = normal.map(read_image).transpose()?;
            let frame = eval::render(&m, &tex, nm.as_ref(), &cam, light)?;
            write_image(&frame.color, &o)?;
        }
        Cmd::Compare { a, b } => {
            let (a, b) = (read_image(&a)?, read_image(&b)?);
            let r = eval::rmse(&a, &b)?;
            println!("rmse={} psnr={}", r, eval::Psnr::from_rmse(r));
        }
        Cmd::Synth { kind, points, noise, seed, o } => {
            let kind: SceneKind = kind.parse()?;
            let scene = synth_scene(kind, points, noise, seed)?;
            write_scene(&scene, &o)?;
            println!("{}", o.join("manifest.json").display());
        }
        Cmd::Bench { manifest, o } => {
            let exe = std::env::current_exe().map_err(|e| Error::Subprocess(format!("cannot locate own executable: {e}")))?;
            let iso = Isolation::Subprocess {
                program: exe,
                args: vec!["run-method".into()],
            };
            let rep = eval::profile_pipeline(&manifest, &o, &iso)?;
            for m in &rep.methods {
                println!(
                    "{:<7} total_ms={:.1} peak_rss_bytes={} psnr={}",
                    m.method.name(),
                    m.total_ms,
                    m.sampled_peak_rss_bytes,
                    m.psnr
                );
            }
        }
        Cmd::RunMethod { method, manifest, out_dir } => {
            let method: Method = method.parse()?;
            let m = SceneManifest::load(&manifest)?;
            let base = manifest.parent().unwrap_or(Path::new("."));
            let run = eval::run_method(method, &m, base, &out_dir)?;
            println!("{}", serde_json::to_string(&run)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(4);
        }
    }
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.to_string().replace('\n', " "));
            ExitCode::from(match e.class() {
                ErrorClass::Data => 3,
                ErrorClass::Config => 4,
            })
        }
    }
}
