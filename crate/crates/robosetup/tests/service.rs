use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use robosetup::service::{router, AppState};
use robosetup_core::fixtures;
use serde_json::{json, Value};
use tower::ServiceExt;

const PLANAR_ARM: &str = r#"<robot name="planar">
  <link name="base"/>
  <link name="link1"><collision><geometry><sphere radius="0.1"/></geometry></collision></link>
  <link name="link2"><collision><geometry><sphere radius="0.1"/></geometry></collision></link>
  <link name="tip"/>
  <joint name="j1" type="revolute">
    <parent link="base"/><child link="link1"/><axis xyz="0 0 1"/>
    <limit lower="-3.14" upper="3.14" velocity="1"/>
  </joint>
  <joint name="j2" type="revolute">
    <parent link="link1"/><child link="link2"/><origin xyz="1 0 0"/><axis xyz="0 0 1"/>
    <limit lower="-3.14" upper="3.14" velocity="1"/>
  </joint>
  <joint name="tip_fixed" type="fixed">
    <parent link="link2"/><child link="tip"/><origin xyz="1 0 0"/>
  </joint>
</robot>"#;

struct Reply {
    status: StatusCode,
    text: String,
}

impl Reply {
    fn json(&self) -> Value {
        serde_json::from_str(&self.text).unwrap_or_else(|e| panic!("{e}: {}", self.text))
    }
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<String>) -> Reply {
    let mut req = Request::builder().method(method).uri(uri);
    if body.is_some() {
        req = req.header("content-type", "application/json");
    }
    let req = req.body(body.map(Body::from).unwrap_or_else(Body::empty)).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    Reply {
        status,
        text: String::from_utf8(bytes.to_vec()).unwrap(),
    }
}

async fn get(app: &Router, uri: &str) -> Reply {
    call(app, Method::GET, uri, None).await
}

async fn post(app: &Router, uri: &str, body: Value) -> Reply {
    call(app, Method::POST, uri, Some(body.to_string())).await
}

async fn put(app: &Router, uri: &str, body: Value) -> Reply {
    call(app, Method::PUT, uri, Some(body.to_string())).await
}

async fn delete(app: &Router, uri: &str) -> Reply {
    call(app, Method::DELETE, uri, None).await
}

fn app() -> Router {
    router(AppState::new(None))
}

async fn load_sample_arm(app: &Router) {
    let r = post(app, "/api/project", json!({ "path": fixtures::fixture_path("sample_arm.urdf") })).await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.text);
}

async fn wait_for_job(app: &Router, id: u64) -> Value {
    let deadline = Instant::now() + Duration::from_secs(120);
    loop {
        let r = get(app, &format!("/api/acm/jobs/{id}")).await;
        assert_eq!(r.status, StatusCode::OK, "{}", r.text);
        let v = r.json();
        if v["finished"] == json!(true) {
            return v;
        }
        assert!(Instant::now() < deadline, "ACM job did not finish");
        tokio::time::sleep(Duration::from_millis(20)).await;
    }
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_robosetup"))
}

fn run_ok(cmd: &mut Command) -> String {
    let out = cmd.output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn read_tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir.join("config"))
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[tokio::test]
async fn endpoints_need_a_project() {
    let app = app();
    for uri in ["/api/model/geometry", "/api/project", "/api/srdf", "/api/world", "/api/export/state", "/api/acm"] {
        let r = get(&app, uri).await;
        assert_eq!(r.status, StatusCode::NOT_FOUND, "{uri}");
        let v = r.json();
        assert_eq!(v["code"], "not_found");
        assert!(v["message"].as_str().unwrap().contains("no project loaded"), "{v}");
    }
    let r = get(&app, "/api/nothing/here").await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
    assert_eq!(r.json()["code"], "not_found");
    let r = get(&app, "/api").await;
    assert_eq!(r.status, StatusCode::OK);
    assert!(r.json().as_array().unwrap().len() >= 18);
}

#[tokio::test]
async fn fk_on_zero_state_puts_the_tip_at_two_meters() {
    let app = app();
    let r = post(&app, "/api/project", json!({ "urdf": PLANAR_ARM })).await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.text);
    let summary = r.json();
    assert_eq!(summary["root_link"], "base");
    assert_eq!(summary["joints"].as_array().unwrap().len(), 3);

    let r = post(&app, "/api/fk", json!({ "positions": { "j1": 0.0, "j2": 0.0 } })).await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.text);
    let tip = &r.json()["links"]["tip"]["xyz"];
    let xyz: Vec<f64> = serde_json::from_value(tip.clone()).unwrap();
    assert!((xyz[0] - 2.0).abs() < 1e-12 && xyz[1].abs() < 1e-12 && xyz[2].abs() < 1e-12, "{xyz:?}");

    let r = post(&app, "/api/fk", json!({ "positions": { "j1": std::f64::consts::FRAC_PI_2 } })).await;
    let xyz: Vec<f64> = serde_json::from_value(r.json()["links"]["tip"]["xyz"].clone()).unwrap();
    assert!(xyz[0].abs() < 1e-12 && (xyz[1] - 2.0).abs() < 1e-12, "{xyz:?}");

    // out of limits and unknown joints are rejected with the element named
    let r = post(&app, "/api/fk", json!({ "positions": { "j1": 4.0 } })).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    assert_eq!(r.json()["element"], "j1");
    let r = post(&app, "/api/fk", json!({ "positions": { "ghost": 0.0 } })).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    assert_eq!(r.json()["element"], "ghost");
}

#[tokio::test]
async fn bad_models_and_bodies_are_rejected_with_the_envelope() {
    let app = app();
    let dangling = PLANAR_ARM.replace(r#"<child link="link2"/>"#, r#"<child link="ghost"/>"#);
    let r = post(&app, "/api/project", json!({ "urdf": dangling })).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    let v = r.json();
    assert_eq!(v["code"], "invalid");
    assert_eq!(v["element"], "j2");

    let r = post(&app, "/api/project", json!({ "urdf": "<robot" })).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);

    let r = call(&app, Method::POST, "/api/project", Some("{not json".into())).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    assert_eq!(r.json()["code"], "invalid");

    let r = post(&app, "/api/project", json!({ "path": "/no/such/robot.urdf" })).await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
    assert_eq!(r.json()["element"], "/no/such/robot.urdf");

    let r = post(&app, "/api/project", json!({})).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    // nothing was loaded by the failures
    assert_eq!(get(&app, "/api/project").await.status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn geometry_lists_every_link_with_triangles() {
    let app = app();
    load_sample_arm(&app).await;
    let r = get(&app, "/api/model/geometry").await;
    assert_eq!(r.status, StatusCode::OK);
    let links = r.json()["links"].as_array().unwrap().clone();
    assert_eq!(links.len(), 7);
    for l in &links {
        for g in l["collision"].as_array().unwrap() {
            let n = g["vertices"].as_array().unwrap().len();
            let tris = g["triangles"].as_array().unwrap();
            assert!(!tris.is_empty());
            for t in tris {
                for i in t.as_array().unwrap() {
                    assert!((i.as_u64().unwrap() as usize) < n);
                }
            }
        }
    }
    assert!(links.iter().any(|l| !l["collision"].as_array().unwrap().is_empty()));
}

#[tokio::test]
async fn a_second_acm_job_conflicts_while_one_runs() {
    let app = app();
    load_sample_arm(&app).await;
    let r = get(&app, "/api/acm").await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);

    let r = post(&app, "/api/acm/jobs", json!({ "samples": 100_000, "seed": 1, "always_threshold": 0.95, "threads": 1 })).await;
    assert_eq!(r.status, StatusCode::ACCEPTED, "{}", r.text);
    let id = r.json()["id"].as_u64().unwrap();
    let r = post(&app, "/api/acm/jobs", json!({ "samples": 100, "seed": 2, "always_threshold": 0.95 })).await;
    assert_eq!(r.status, StatusCode::CONFLICT, "{}", r.text);
    assert_eq!(r.json()["code"], "conflict");

    let r = get(&app, &format!("/api/acm/jobs/{id}")).await;
    assert_eq!(r.json()["total"], 100_000);
    assert_eq!(delete(&app, &format!("/api/acm/jobs/{id}")).await.status, StatusCode::NO_CONTENT);
    let v = wait_for_job(&app, id).await;
    assert!(v["error"].is_string(), "{v}");
    // a cancelled job leaves no report, and a new one may start
    assert_eq!(get(&app, "/api/acm").await.status, StatusCode::NOT_FOUND);
    let r = post(&app, "/api/acm/jobs", json!({ "samples": 200, "seed": 2, "always_threshold": 0.95 })).await;
    assert_eq!(r.status, StatusCode::ACCEPTED, "{}", r.text);

    assert_eq!(get(&app, "/api/acm/jobs/99").await.status, StatusCode::NOT_FOUND);
    assert_eq!(get(&app, "/api/acm/jobs/abc").await.status, StatusCode::BAD_REQUEST);
    let r = post(&app, "/api/acm/jobs", json!({ "samples": 0, "seed": 2, "always_threshold": 0.95 })).await;
    assert!(r.status == StatusCode::BAD_REQUEST || r.status == StatusCode::CONFLICT, "{}", r.status);
}

#[tokio::test]
async fn semantic_edits_are_validated_or_rejected_atomically() {
    let app = app();
    load_sample_arm(&app).await;
    let before = get(&app, "/api/srdf").await.text;

    let r = post(&app, "/api/srdf/groups", json!({ "name": "arm", "chains": [{ "base_link": "base_link", "tip_link": "tool" }] })).await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.text);
    assert!(r.json()["findings"].is_array());

    // unknown link: 400, naming it, and nothing changes
    let after_group = get(&app, "/api/srdf").await.text;
    assert_ne!(after_group, before);
    let r = post(&app, "/api/srdf/groups", json!({ "name": "bad", "links": ["ghost"] })).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST, "{}", r.text);
    assert_eq!(r.json()["element"], "bad/ghost");
    assert_eq!(get(&app, "/api/srdf").await.text, after_group);

    // duplicates conflict; unknown keys and collections are 404
    let r = post(&app, "/api/srdf/groups", json!({ "name": "arm", "joints": ["elbow"] })).await;
    assert_eq!(r.status, StatusCode::CONFLICT);
    assert_eq!(delete(&app, "/api/srdf/groups/nope").await.status, StatusCode::NOT_FOUND);
    assert_eq!(get(&app, "/api/srdf/widgets").await.status, StatusCode::NOT_FOUND);
    let r = post(&app, "/api/srdf/groups", json!({ "name": "x", "colour": "red" })).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);

    // group state with an out-of-limit value is rejected
    let r = post(&app, "/api/srdf/group_states", json!({ "name": "up", "group": "arm", "values": { "shoulder_pan": 0.0, "shoulder_lift": 0.3, "elbow": 9.0, "wrist_roll": 0.0, "wrist_pitch": 0.0, "wrist_yaw": 0.0 } })).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST, "{}", r.text);
    assert_eq!(get(&app, "/api/srdf").await.text, after_group);

    let r = post(&app, "/api/srdf/group_states", json!({ "name": "up", "group": "arm", "values": { "shoulder_pan": 0.0, "shoulder_lift": 0.3, "elbow": 0.5, "wrist_roll": 0.0, "wrist_pitch": 0.0, "wrist_yaw": 0.0 } })).await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.text);
    let r = put(&app, "/api/srdf/group_states/arm/up", json!({ "name": "up", "group": "arm", "values": { "shoulder_pan": 0.0, "shoulder_lift": 0.3, "elbow": 0.7, "wrist_roll": 0.0, "wrist_pitch": 0.0, "wrist_yaw": 0.0 } })).await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.text);
    let states = get(&app, "/api/srdf/group_states").await.json();
    assert_eq!(states[0]["values"]["elbow"], 0.7);

    // removing the group would leave the state dangling
    let r = delete(&app, "/api/srdf/groups/arm").await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST, "{}", r.text);
    assert_eq!(get(&app, "/api/srdf/groups").await.json().as_array().unwrap().len(), 1);

    let r = post(&app, "/api/srdf/end_effectors", json!({ "name": "hand", "group": "arm", "parent_link": "wrist" })).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    assert_eq!(r.json()["element"], "hand/wrist");
    assert_eq!(post(&app, "/api/srdf/groups", json!({ "name": "gripper", "links": ["tool"] })).await.status, StatusCode::OK);
    let r = post(&app, "/api/srdf/end_effectors", json!({ "name": "hand", "group": "gripper", "parent_link": "tool", "parent_group": "arm" })).await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.text);
    let r = post(&app, "/api/srdf/virtual_joints", json!({ "name": "world_joint", "kind": "fixed", "parent_frame": "world", "child_link": "base_link" })).await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.text);

    // a passive joint may not be set by a stored group state
    let r = post(&app, "/api/srdf/passive_joints", json!({ "name": "wrist_roll" })).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    assert_eq!(r.json()["element"], "up/wrist_roll");
    assert_eq!(delete(&app, "/api/srdf/group_states/arm/up").await.status, StatusCode::OK);
    let r = post(&app, "/api/srdf/passive_joints", json!({ "name": "wrist_roll" })).await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.text);
    assert_eq!(r.json()["findings"][0]["severity"], "warning");
    assert_eq!(get(&app, "/api/srdf/passive_joints").await.json(), json!([{ "name": "wrist_roll" }]));
    assert_eq!(delete(&app, "/api/srdf/passive_joints/wrist_roll").await.status, StatusCode::OK);
    assert_eq!(get(&app, "/api/srdf/passive_joints").await.json(), json!([]));

    // whole-document import goes through the same validation
    let r = call(&app, Method::PUT, "/api/srdf", Some(fixtures::SAMPLE_ARM_SRDF.into())).await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.text);
    assert_eq!(get(&app, "/api/srdf/groups").await.json().as_array().unwrap().len(), 2);
    assert_eq!(get(&app, "/api/srdf/report").await.status, StatusCode::OK);
}

#[tokio::test]
async fn world_and_state_round_trip() {
    let app = app();
    load_sample_arm(&app).await;
    let r = post(&app, "/api/world", serde_json::from_str(fixtures::OBSTRUCTED_2JOINT_SCENE).unwrap()).await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.text);
    let world = get(&app, "/api/world").await.text;
    assert_eq!(
        serde_json::from_str::<Value>(&world).unwrap(),
        serde_json::from_str::<Value>(fixtures::OBSTRUCTED_2JOINT_SCENE).unwrap()
    );
    let r = call(&app, Method::POST, "/api/world", Some("{\"objects\": 3}".into())).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    assert_eq!(get(&app, "/api/world").await.text, world);

    let r = post(&app, "/api/import/state", json!({ "elbow": 0.1 + 0.2, "wrist_yaw": -1e-300 })).await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.text);
    let exported = get(&app, "/api/export/state").await.json();
    assert_eq!(exported["elbow"].as_f64().unwrap().to_bits(), (0.1f64 + 0.2).to_bits());
    assert_eq!(exported["wrist_yaw"].as_f64().unwrap().to_bits(), (-1e-300f64).to_bits());
    assert_eq!(exported.as_object().unwrap().len(), 6);

    let r = post(&app, "/api/import/state", json!({ "elbow": 7.0 })).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    assert_eq!(get(&app, "/api/export/state").await.json(), exported);
}

#[tokio::test(flavor = "multi_thread")]
async fn plans_named_joint_and_random_goals() {
    let app = app();
    let r = post(
        &app,
        "/api/project",
        json!({
            "path": fixtures::fixture_path("obstructed_2joint.urdf"),
            "srdf": fixtures::OBSTRUCTED_2JOINT_SRDF,
        }),
    )
    .await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.text);
    post(&app, "/api/world", serde_json::from_str(fixtures::OBSTRUCTED_2JOINT_SCENE).unwrap()).await;

    let r = post(&app, "/api/plan", json!({ "group": "arm", "start": { "j1": -1.0, "j2": 0.0 }, "goal": { "type": "named", "name": "right" }, "seed": 3 })).await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.text);
    let v = r.json();
    let waypoints = v["path"]["waypoints"].as_array().unwrap();
    assert_eq!(waypoints[0], json!([-1.0, 0.0]));
    assert!((waypoints.last().unwrap()[0].as_f64().unwrap() - 1.0).abs() < 1e-3);
    assert!(v["trajectory"].is_object());
    assert!(v["checks_performed"].as_u64().unwrap() > 0);

    // the same request is reproducible
    let again = post(&app, "/api/plan", json!({ "group": "arm", "start": { "j1": -1.0, "j2": 0.0 }, "goal": { "type": "named", "name": "right" }, "seed": 3 })).await;
    assert_eq!(again.json()["path"], v["path"]);

    let r = post(&app, "/api/random_state", json!({ "group": "arm", "seed": 5 })).await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.text);
    let goal = r.json();
    let r = post(&app, "/api/plan", json!({ "group": "arm", "start": { "j1": -1.0, "j2": 0.0 }, "goal": { "type": "joint", "state": goal }, "seed": 1 })).await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.text);

    let r = post(&app, "/api/plan", json!({ "group": "arm", "goal": { "type": "named", "name": "nowhere" } })).await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
    assert_eq!(r.json()["element"], "nowhere");
    let r = post(&app, "/api/plan", json!({ "group": "legs", "goal": { "type": "named", "name": "right" } })).await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
}

/// Load, ACM job, one chain group, one pose, bundle: equal to the CLI chain with
/// the same inputs.
#[tokio::test(flavor = "multi_thread")]
async fn scripted_sequence_matches_the_cli() {
    let tmp = tempfile::tempdir().unwrap();
    let urdf = fixtures::fixture_path("sample_arm.urdf");

    let app = app();
    load_sample_arm(&app).await;
    let r = post(&app, "/api/acm/jobs", json!({ "samples": 3000, "seed": 7, "always_threshold": 0.95 })).await;
    let id = r.json()["id"].as_u64().unwrap();
    let done = wait_for_job(&app, id).await;
    assert!(done["error"].is_null(), "{done}");
    let service_acm = get(&app, "/api/acm").await;
    assert_eq!(service_acm.status, StatusCode::OK);

    let r = post(&app, "/api/srdf/groups", json!({ "name": "arm", "chains": [{ "base_link": "base_link", "tip_link": "tool" }] })).await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.text);
    let r = post(&app, "/api/srdf/group_states", json!({ "name": "bent", "group": "arm", "values": { "shoulder_pan": 0.0, "shoulder_lift": 0.3, "elbow": 1.0, "wrist_roll": 0.0, "wrist_pitch": 0.0, "wrist_yaw": 0.0 } })).await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.text);
    let via_service = tmp.path().join("service");
    let r = post(&app, "/api/bundle", json!({ "directory": via_service })).await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.text);
    let manifest = r.json();
    assert_eq!(manifest["files"].as_array().unwrap().len(), 6);
    let r = post(&app, "/api/bundle", json!({ "directory": via_service })).await;
    assert_eq!(r.status, StatusCode::CONFLICT);
    assert_eq!(post(&app, "/api/bundle", json!({ "directory": via_service, "overwrite": true })).await.status, StatusCode::OK);

    let acm_json = tmp.path().join("acm.json");
    run_ok(bin().arg("acm").arg(&urdf).args(["--samples", "3000", "--seed", "7", "-o"]).arg(&acm_json));
    assert_eq!(std::fs::read_to_string(&acm_json).unwrap(), service_acm.text);

    let srdf = tmp.path().join("arm.srdf");
    std::fs::write(
        &srdf,
        r#"<robot name="sample_arm">
  <group name="arm"><chain base_link="base_link" tip_link="tool"/></group>
  <group_state name="bent" group="arm">
    <joint name="elbow" value="1"/>
    <joint name="shoulder_lift" value="0.3"/>
    <joint name="shoulder_pan" value="0"/>
    <joint name="wrist_pitch" value="0"/>
    <joint name="wrist_roll" value="0"/>
    <joint name="wrist_yaw" value="0"/>
  </group_state>
</robot>"#,
    )
    .unwrap();
    let via_cli = tmp.path().join("cli");
    let stdout = run_ok(bin().arg("genconfig").arg(&urdf).arg("--srdf").arg(&srdf).arg("--acm").arg(&acm_json).arg("-o").arg(&via_cli));
    assert_eq!(read_tree(&via_cli), read_tree(&via_service));
    for f in manifest["files"].as_array().unwrap() {
        assert!(stdout.contains(f["sha256"].as_str().unwrap()));
    }
}
