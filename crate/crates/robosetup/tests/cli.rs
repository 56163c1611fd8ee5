use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use robosetup_core::bench::parse_results;
use robosetup_core::fixtures::{self, fixture_path};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_robosetup"))
}

fn run(args: &[&dyn AsRef<std::ffi::OsStr>]) -> Output {
    let mut cmd = bin();
    for a in args {
        cmd.arg(a);
    }
    cmd.output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn ok(out: Output) -> String {
    assert!(out.status.success(), "{}", stderr(&out));
    String::from_utf8(out.stdout).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn validate_reports_and_sets_exit_codes() {
    let out = run(&[&"validate", &fixture_path("sample_arm.urdf")]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stderr(&out).contains("6 active"));

    let tmp = tempfile::tempdir().unwrap();
    let broken = fixtures::PLANAR_2LINK_URDF.replace(r#"<child link="link1"/>"#, r#"<child link="ghost"/>"#);
    let out = run(&[&"validate", &write(tmp.path(), "broken.urdf", &broken)]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("j1"), "{}", stderr(&out));

    assert_eq!(code(&run(&[&"validate", &tmp.path().join("missing.urdf")])), 4);
    assert_eq!(code(&run(&[&"validate"])), 2);
    assert_eq!(code(&run(&[&"frobnicate"])), 2);
}

#[test]
fn acm_output_is_identical_across_runs_and_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let urdf = fixture_path("sample_arm.urdf");
    let mut outputs = Vec::new();
    for threads in ["1", "4", "4"] {
        let o = tmp.path().join(format!("acm{}.json", outputs.len()));
        ok(run(&[&"acm", &urdf, &"--samples", &"2000", &"--seed", &"7", &"--threads", &threads, &"-o", &o]));
        outputs.push(std::fs::read(&o).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[1], outputs[2]);
    let stdout = ok(run(&[&"acm", &urdf, &"--samples", &"2000", &"--seed", &"7"]));
    assert_eq!(stdout.as_bytes(), outputs[0]);

    let other = ok(run(&[&"acm", &urdf, &"--samples", &"2000", &"--seed", &"8"]));
    assert_ne!(other.as_bytes(), outputs[0]);

    assert_eq!(code(&run(&[&"acm", &urdf, &"--samples", &"0"])), 3);
    assert_eq!(code(&run(&[&"acm", &urdf, &"--threshold", &"1.5"])), 3);
}

fn obstructed_bundle(dir: &Path) -> PathBuf {
    let bundle = dir.join("bundle");
    ok(run(&[
        &"genconfig",
        &fixture_path("obstructed_2joint.urdf"),
        &"--srdf",
        &fixture_path("obstructed_2joint.srdf"),
        &"-o",
        &bundle,
    ]));
    bundle
}

#[test]
fn genconfig_refuses_to_clobber_and_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let a = obstructed_bundle(tmp.path());
    let out = run(&[
        &"genconfig",
        &fixture_path("obstructed_2joint.urdf"),
        &"--srdf",
        &fixture_path("obstructed_2joint.srdf"),
        &"-o",
        &a,
    ]);
    assert_eq!(code(&out), 5, "{}", stderr(&out));
    let again = ok(run(&[
        &"genconfig",
        &fixture_path("obstructed_2joint.urdf"),
        &"--srdf",
        &fixture_path("obstructed_2joint.srdf"),
        &"-o",
        &a,
        &"--overwrite",
    ]));
    let b = tmp.path().join("b");
    let other = ok(run(&[
        &"genconfig",
        &fixture_path("obstructed_2joint.urdf"),
        &"--srdf",
        &fixture_path("obstructed_2joint.srdf"),
        &"-o",
        &b,
    ]));
    assert_eq!(again, other);
    assert_eq!(again.lines().count(), 6);

    let bad_srdf = write(tmp.path(), "bad.srdf", r#"<robot name="obstructed_2joint"><group name="g"><link name="ghost"/></group></robot>"#);
    let out = run(&[&"genconfig", &fixture_path("obstructed_2joint.urdf"), &"--srdf", &bad_srdf, &"-o", &tmp.path().join("c")]);
    assert_eq!(code(&out), 3);
    assert!(!tmp.path().join("c").exists());
}

#[test]
fn plan_writes_a_trajectory_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let bundle = obstructed_bundle(tmp.path());
    let scene = fixture_path("obstructed_2joint.scene.json");
    let csv = tmp.path().join("traj.csv");
    ok(run(&[&"plan", &bundle, &"--start", &"left", &"--goal", &"right", &"--world", &scene, &"-o", &csv]));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("t,"), "{header}");
    assert!(header.contains("j1") && header.contains("j2"), "{header}");
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert!(rows.len() > 10);
    let j1 = header.split(',').position(|h| h == "j1_pos").unwrap();
    assert!((rows[0][j1] + 1.0).abs() < 1e-9);
    assert!((rows.last().unwrap()[j1] - 1.0).abs() < 1e-3);

    // same inputs, same bytes
    let again = ok(run(&[&"plan", &bundle, &"--start", &"left", &"--goal", &"right", &"--world", &scene]));
    assert_eq!(again, text);

    // a JSON request file
    let req = write(
        tmp.path(),
        "req.json",
        r#"{"group": "arm", "start": {"j1": -1, "j2": 0}, "goal": {"type": "joint", "state": {"j1": 1, "j2": 0}}, "seed": 4}"#,
    );
    ok(run(&[&"plan", &bundle, &"--request", &req, &"--world", &scene, &"--period", &"0"]));

    let out = run(&[&"plan", &bundle, &"--goal", &"nowhere"]);
    assert_eq!(code(&out), 4, "{}", stderr(&out));
    let out = run(&[&"plan", &bundle, &"--goal", &"j1=9"]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    let hopeless = write(
        tmp.path(),
        "hopeless.json",
        r#"{"group": "arm", "start": {"j1": -1, "j2": 0}, "goal": {"type": "joint", "state": {"j1": 1, "j2": 0}}, "time_budget": 1e-9}"#,
    );
    let out = run(&[&"plan", &bundle, &"--request", &hopeless, &"--world", &scene]);
    assert_eq!(code(&out), 7, "{}", stderr(&out));
    assert_eq!(code(&run(&[&"plan", &bundle])), 2);
    assert_eq!(code(&run(&[&"plan", &tmp.path().join("nope"), &"--goal", &"right"])), 4);
}

#[test]
fn bench_rows_follow_the_configuration() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = format!(
        "scene.urdf: {}\nscene.srdf: {}\nscene.world: {}\nrepetitions: 2\ntime_budget: 5\nseed: 3\n\
         planner.a.type: rrt\nplanner.a.acm: semantic\nplanner.b.type: rrt\nplanner.b.acm: adjacent\n\
         query.q.group: arm\nquery.q.start: left\nquery.q.goal: right\n\
         sweep.0.param: planner.goal_bias\nsweep.0.lower: 0.05\nsweep.0.upper: 0.1\nsweep.0.increment: 0.05\n",
        fixture_path("obstructed_2joint.urdf").display(),
        fixture_path("obstructed_2joint.srdf").display(),
        fixture_path("obstructed_2joint.scene.json").display(),
    );
    let conf = write(tmp.path(), "bench.conf", &conf);
    let (one, four) = (tmp.path().join("one.csv"), tmp.path().join("four.csv"));
    ok(run(&[&"bench", &conf, &"-o", &one, &"--threads", &"1"]));
    ok(run(&[&"bench", &conf, &"-o", &four, &"--threads", &"4"]));
    let rows = parse_results(&std::fs::read_to_string(&one).unwrap()).unwrap();
    let rows4 = parse_results(&std::fs::read_to_string(&four).unwrap()).unwrap();
    // 2 planners x 1 query x 2 sweep values x 2 repetitions
    assert_eq!(rows.len(), 8);
    assert_eq!(rows.len(), rows4.len());
    for (a, b) in rows.iter().zip(&rows4) {
        assert_eq!((&a.planner, &a.query, a.repetition, a.success), (&b.planner, &b.query, b.repetition, b.success));
        assert_eq!(a.path_length.map(f64::to_bits), b.path_length.map(f64::to_bits));
    }
    assert!(rows.iter().all(|r| r.success));

    let broken = write(tmp.path(), "broken.conf", "scene.urdf: x.urdf\n");
    assert_eq!(code(&run(&[&"bench", &broken, &"-o", &tmp.path().join("x.csv")])), 3);
}

/// Sends one GET over a fresh connection and returns (status, body).
fn http_get(addr: &str, path: &str) -> (u16, String) {
    let mut s = TcpStream::connect(addr).unwrap();
    write!(s, "GET {path} HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\n\r\n").unwrap();
    let mut text = String::new();
    s.read_to_string(&mut text).unwrap();
    let status = text.split_whitespace().nth(1).unwrap().parse().unwrap();
    let body = text.split("\r\n\r\n").nth(1).unwrap_or_default().to_string();
    (status, body)
}

#[test]
fn serve_answers_before_a_project_is_loaded() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "index.html", "<html>ui</html>");
    let mut child = bin()
        .args(["serve", "--port", "0", "--ui"])
        .arg(tmp.path())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stderr.take().unwrap()).read_line(&mut line).unwrap();
    let addr = line.trim().strip_prefix("listening on http://").unwrap().to_string();

    let (status, body) = http_get(&addr, "/api/model/geometry");
    assert_eq!(status, 404);
    assert!(body.contains("no project loaded"), "{body}");
    let (status, body) = http_get(&addr, "/");
    assert_eq!(status, 200);
    assert!(body.contains("<html>ui</html>"));
    let (status, _) = http_get(&addr, "/api");
    assert_eq!(status, 200);
    child.kill().unwrap();
    child.wait().unwrap();
}
