use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

use pcbake::assets::{write_image, TexelGrid};

fn pcbake(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pcbake"))
        .args(args)
        .output()
        .expect("spawn pcbake")
}

fn ok(args: &[&str]) -> String {
    let out = pcbake(args);
    assert!(
        out.status.success(),
        "pcbake {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, kind: &str, points: &str) {
    ok(&["synth", kind, "--points", points, "--seed", "3", "-o", s(dir)]);
}

#[test]
fn compare_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("f.png");
    let mut img = TexelGrid::new(8, 4);
    img.set(3, 1, [200, 10, 70]);
    write_image(&img, &f).unwrap();
    assert_eq!(ok(&["compare", s(&f), s(&f)]).trim(), "rmse=0 psnr=identical");
}

#[test]
fn compare_prints_finite_psnr() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.png"), dir.path().join("b.png"));
    write_image(&TexelGrid::filled(4, 4, [0, 0, 0]), &a).unwrap();
    write_image(&TexelGrid::filled(4, 4, [255, 255, 255]), &b).unwrap();
    assert_eq!(ok(&["compare", s(&a), s(&b)]).trim(), "rmse=255 psnr=0");
}

#[test]
fn bake_without_uvs_asks_for_unwrap() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "checker-plane", "2000");
    let out = pcbake(&[
        "bake",
        s(&dir.path().join("cloud.ply")),
        s(&dir.path().join("low.obj")),
        "-o",
        s(&dir.path().join("x")),
    ]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("unwrap"), "{err}");
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    // usage
    assert_eq!(pcbake(&["bake"]).status.code(), Some(2));
    assert_eq!(pcbake(&["no-such-command"]).status.code(), Some(2));
    // config
    let out = pcbake(&["synth", "torus", "-o", s(dir.path())]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: "));
    assert_eq!(pcbake(&["synth", "checker-plane", "--points", "10", "-o", s(dir.path())]).status.code(), Some(4));
    // data
    let missing = dir.path().join("missing.png");
    assert_eq!(pcbake(&["compare", s(&missing), s(&missing)]).status.code(), Some(3));
    let junk = dir.path().join("junk.obj");
    std::fs::write(&junk, "v 0 0 0\nf 1 2 3\n").unwrap();
    assert_eq!(pcbake(&["unwrap", s(&junk), "-o", s(&dir.path().join("o.obj"))]).status.code(), Some(3));
}

#[test]
fn render_rejects_malformed_arguments() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "checker-plane", "2000");
    let mesh = dir.path().join("uv.obj");
    ok(&["unwrap", s(&dir.path().join("low.obj")), "--resolution", "64", "-o", s(&mesh)]);
    let tex = dir.path().join("t.png");
    write_image(&TexelGrid::filled(64, 64, [9, 9, 9]), &tex).unwrap();
    let frame = dir.path().join("f.png");
    let base = ["render", s(&mesh), s(&tex), "-o", s(&frame)];
    let with = |extra: &[&str]| {
        let mut a = base.to_vec();
        a.extend_from_slice(extra);
        pcbake(&a).status.code()
    };
    assert_eq!(with(&["--camera", "0,0,1"]), Some(4));
    assert_eq!(with(&["--camera", "0.5,-1,1,0.5,0.5,0,45", "--size", "0x10"]), Some(4));
    assert_eq!(with(&["--camera", "0.5,-1,1,0.5,0.5,0,45", "--light", "0,0,0"]), Some(4));
    assert_eq!(with(&["--camera", "0.5,-1,1,0.5,0.5,0,45", "--size", "32x16"]), Some(0));
    let img = pcbake::assets::read_image(&frame).unwrap();
    assert_eq!((img.width, img.height), (32, 16));
}

#[test]
fn synth_is_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [a.path(), b.path()] {
        ok(&["synth", "step-wall", "--points", "5000", "--noise", "0.002", "--seed", "11", "-o", s(d)]);
    }
    for f in ["cloud.ply", "low.obj", "high.obj", "manifest.json"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert!(x == y, "{f} differs");
    }
}

#[test]
fn bench_reads_what_synth_writes() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "checker-plane", "20000");
    let rep = dir.path().join("rep");
    let stdout = ok(&["bench", s(&dir.path().join("manifest.json")), "-o", s(&rep)]);
    assert_eq!(stdout.lines().count(), 3, "{stdout}");

    let csv = std::fs::read_to_string(rep.join("report.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("method,stage,wall_ms,peak_rss_bytes"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 15);
    for m in ["lpm", "remesh", "ours"] {
        for st in ["load", "unwrap", "bake", "write", "total"] {
            let r = rows.iter().find(|r| r[0] == m && r[1] == st).unwrap_or_else(|| panic!("{m}/{st}"));
            assert!(r[2].parse::<f64>().unwrap() >= 0.0);
            assert!(r[3].parse::<u64>().unwrap() > 0);
        }
        for cam in 0..2 {
            assert!(rep.join(format!("frames/{m}_cam{cam}.png")).exists());
        }
    }
    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(rep.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["methods"].as_array().unwrap().len(), 3);
}

#[test]
fn bench_names_a_broken_manifest_field() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("manifest.json");
    std::fs::write(&m, r#"{"cloud": "c.ply"}"#).unwrap();
    let out = pcbake(&["bench", s(&m), "-o", s(&dir.path().join("rep"))]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("low_mesh"));
}

fn render(mesh: &Path, prefix: &Path, out: &Path) {
    let albedo = prefix.with_file_name(format!("{}_albedo.png", prefix.file_name().unwrap().to_str().unwrap()));
    let normal = prefix.with_file_name(format!("{}_normal.png", prefix.file_name().unwrap().to_str().unwrap()));
    ok(&[
        "render",
        s(mesh),
        s(&albedo),
        s(&normal),
        "--camera",
        "0.5,-0.9,1.1,0.5,0.5,0,45",
        "--size",
        "256x256",
        "-o",
        s(out),
    ]);
}

#[test]
fn full_chain_on_a_million_point_plane() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, "checker-plane", "1000000");
    let uv = d.join("uv.obj");
    ok(&["unwrap", s(&d.join("low.obj")), "--resolution", "512", "-o", s(&uv)]);
    let cloud = d.join("cloud.ply");
    let (ours, lpm) = (d.join("ours"), d.join("lpm"));
    let stdout = ok(&["bake", s(&cloud), s(&uv), "--d-max", "0.01", "--resolution", "512", "-o", s(&ours)]);
    assert!(stdout.contains("fallback=0"), "{stdout}");
    ok(&["bake-lpm", s(&cloud), s(&uv), "--resolution", "512", "-o", s(&lpm)]);

    let (f1, f2, f3) = (d.join("ours.png"), d.join("again.png"), d.join("lpm.png"));
    render(&uv, &ours, &f1);
    render(&uv, &ours, &f2);
    render(&uv, &lpm, &f3);
    assert_eq!(ok(&["compare", s(&f1), s(&f2)]).trim(), "rmse=0 psnr=identical");
    let line = ok(&["compare", s(&f1), s(&f3)]);
    let rmse: f64 = line.trim().strip_prefix("rmse=").unwrap().split(' ').next().unwrap().parse().unwrap();
    assert!(rmse > 1.0, "{line}");
    assert!(start.elapsed().as_secs_f64() < 120.0, "{:?}", start.elapsed());
}
