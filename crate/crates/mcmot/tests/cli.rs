use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mcmot::formats;
use mcmot_core::geometry::{canonical_distance, Homography};
use mcmot_core::global_tracker::{run_global, GlobalConfig, StreamAlignment};
use mcmot_core::simulator::{simulate, PenConfig};
use tempfile::TempDir;

fn mcmot(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mcmot"))
        .current_dir(dir)
        .args(args)
        .env_clear()
        .output()
        .expect("spawn mcmot")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn value(report: &str, key: &str) -> String {
    let prefix = format!("{key}=");
    report
        .lines()
        .find_map(|l| l.strip_prefix(&prefix))
        .unwrap_or_else(|| panic!("{key} missing from report:\n{report}"))
        .to_owned()
}

fn number(report: &str, key: &str) -> f64 {
    value(report, key).parse().unwrap()
}

const SMALL_PEN: &str = "n_agents = 4\nduration = 90\n";

fn small_scene(dir: &Path) {
    fs::write(dir.join("pen.toml"), SMALL_PEN).unwrap();
    let o = mcmot(dir, &["simulate", "--config", "pen.toml", "--out", "scene", "--seed", "2"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn simulate_one_agent_writes_six_files() {
    let t = TempDir::new().unwrap();
    fs::write(t.path().join("one.toml"), "n_agents = 1\nduration = 10\nspawn_region = [2.5, 5.5, 3.5, 6.5]\n").unwrap();
    let o = mcmot(t.path(), &["simulate", "--config", "one.toml", "--out", "b"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let mut names: Vec<_> = fs::read_dir(t.path().join("b")).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    assert_eq!(
        names,
        [
            "angled_detections.csv",
            "ceiling_detections.csv",
            "correspondences.txt",
            "ground_truth.csv",
            "h_ceiling_to_angled.txt",
            "manifest.toml"
        ]
    );
    let gt = fs::read_to_string(t.path().join("b/ground_truth.csv")).unwrap();
    assert_eq!(formats::read_annotated(&gt).unwrap().len(), 20);
}

#[test]
fn bad_simulate_config_exits_2_and_names_the_field() {
    let t = TempDir::new().unwrap();
    for (text, field) in [("fps = -1.0\n", "fps"), ("n_agnts = 3\n", "n_agnts"), ("[noise]\ndropout_prob = 1.5\n", "dropout_prob")] {
        fs::write(t.path().join("bad.toml"), text).unwrap();
        let o = mcmot(t.path(), &["simulate", "--config", "bad.toml", "--out", "b"]);
        assert_eq!(code(&o), 2, "{text}");
        assert!(stderr(&o).contains(field), "{}", stderr(&o));
    }
    let o = mcmot(t.path(), &["simulate", "--config", "missing.toml", "--out", "b"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn unknown_flag_is_a_config_error() {
    let t = TempDir::new().unwrap();
    assert_eq!(code(&mcmot(t.path(), &["track", "x.csv", "--bogus"])), 2);
}

#[test]
fn square_correspondences_give_identity() {
    let t = TempDir::new().unwrap();
    fs::write(t.path().join("sq.txt"), "0 0 0 0\n100 0 100 0\n100 100 100 100\n0 100 0 100\n").unwrap();
    for method in ["ransac", "dlt"] {
        let o = mcmot(t.path(), &["estimate-homography", "sq.txt", "--method", method]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let h = formats::read_homography(&stdout(&o)).unwrap();
        assert!(canonical_distance(&h, &Homography::identity()) < 1e-12);
        assert!(stdout(&o).starts_with("# inliers 4/4\n"));
    }
}

#[test]
fn three_correspondences_exit_3() {
    let t = TempDir::new().unwrap();
    fs::write(t.path().join("three.txt"), "0 0 0 0\n1 0 1 0\n0 1 0 1\n").unwrap();
    for method in ["ransac", "dlt"] {
        assert_eq!(code(&mcmot(t.path(), &["estimate-homography", "three.txt", "--method", method])), 3);
    }
}

#[test]
fn simulated_correspondences_recover_the_true_homography() {
    let t = TempDir::new().unwrap();
    small_scene(t.path());
    let truth = formats::read_homography(&fs::read_to_string(t.path().join("scene/h_ceiling_to_angled.txt")).unwrap()).unwrap();
    for method in ["ransac", "dlt"] {
        let o = mcmot(t.path(), &["estimate-homography", "scene/correspondences.txt", "--method", method, "--out", "h.txt"]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let h = formats::read_homography(&fs::read_to_string(t.path().join("h.txt")).unwrap()).unwrap();
        assert!(canonical_distance(&h, &truth) < 1e-6);
    }
}

#[test]
fn compose_of_identities_is_identity() {
    let t = TempDir::new().unwrap();
    let id = formats::write_homography(&Homography::identity(), None);
    let tr = formats::write_homography(&Homography::translation(5.0, -2.0), None);
    fs::write(t.path().join("id.txt"), id).unwrap();
    fs::write(t.path().join("tr.txt"), tr).unwrap();
    let o = mcmot(t.path(), &["compose-homography", "--ceiling-to-top", "tr.txt", "--angled-to-top", "tr.txt", "--top-to-top", "id.txt"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let h = formats::read_homography(&stdout(&o)).unwrap();
    assert!(canonical_distance(&h, &Homography::identity()) < 1e-12);
}

#[test]
fn track_empty_and_unsorted_inputs() {
    let t = TempDir::new().unwrap();
    fs::write(t.path().join("empty.csv"), "").unwrap();
    let o = mcmot(t.path(), &["track", "empty.csv"]);
    assert_eq!(code(&o), 0);
    assert!(formats::read_tracks(&stdout(&o)).unwrap().is_empty());
    fs::write(t.path().join("uns.csv"), "1,0,0,10,10,1\n0,0,0,10,10,1\n").unwrap();
    let o = mcmot(t.path(), &["track", "uns.csv"]);
    assert_eq!(code(&o), 4);
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
    fs::write(t.path().join("junk.csv"), "0,0,0,ten,10,1\n").unwrap();
    assert_eq!(code(&mcmot(t.path(), &["track", "junk.csv"])), 4);
    assert_eq!(code(&mcmot(t.path(), &["track", "empty.csv", "--gate", "-1"])), 2);
}

#[test]
fn clean_stream_tracks_keep_one_id_per_agent() {
    let t = TempDir::new().unwrap();
    small_scene(t.path());
    let o = mcmot(t.path(), &["track", "scene/ceiling_detections.csv", "--confirm-hits", "1", "--out", "c.csv"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let tracks = formats::read_tracks(&fs::read_to_string(t.path().join("c.csv")).unwrap()).unwrap();
    let gt = formats::read_annotated(&fs::read_to_string(t.path().join("scene/ground_truth.csv")).unwrap()).unwrap();
    let ceiling_gt: Vec<_> = gt.iter().filter(|g| g.camera.as_str() == "ceiling").collect();
    assert_eq!(tracks.len(), ceiling_gt.len());
    let mut pairs = std::collections::BTreeSet::new();
    for (r, g) in tracks.iter().zip(&ceiling_gt) {
        assert_eq!(r.frame, g.frame);
        assert_eq!(r.bbox, g.bbox);
        pairs.insert((r.local_id.0, g.identity));
    }
    let ids: std::collections::BTreeSet<_> = pairs.iter().map(|p| p.0).collect();
    assert_eq!(ids.len(), pairs.len(), "a local ID covers two agents");
}

#[test]
fn align_mirrors_the_library() {
    let t = TempDir::new().unwrap();
    small_scene(t.path());
    for cam in ["ceiling", "angled"] {
        let o = mcmot(t.path(), &["track", &format!("scene/{cam}_detections.csv"), "--out", &format!("{cam}.csv")]);
        assert_eq!(code(&o), 0);
    }
    let o = mcmot(
        t.path(),
        &[
            "align", "--ceiling", "ceiling.csv", "--angled", "angled.csv", "--homography", "scene/h_ceiling_to_angled.txt",
            "--offset", "-2", "--min-area", "5", "--out", "g.csv", "--matches", "m.csv", "--audit", "audit.txt",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let read = |p: &str| fs::read_to_string(t.path().join(p)).unwrap();
    let tracks = [formats::read_tracks(&read("ceiling.csv")).unwrap(), formats::read_tracks(&read("angled.csv")).unwrap()];
    let h = formats::read_homography(&read("scene/h_ceiling_to_angled.txt")).unwrap();
    let mut cfg = GlobalConfig::default();
    cfg.align.min_area_px2 = 5.0;
    cfg.audit = true;
    let run = run_global(&tracks[0], &tracks[1], &h, StreamAlignment { frame_offset: -2 }, &cfg).unwrap();
    assert_eq!(read("g.csv"), formats::write_global(&run.records));
    assert_eq!(read("m.csv"), formats::write_matches(&run.matches));
    assert_eq!(read("audit.txt"), run.audit);
    assert!(!run.audit.is_empty());
}

#[test]
fn evaluate_perfect_and_empty_predictions() {
    let t = TempDir::new().unwrap();
    small_scene(t.path());
    let o = mcmot(t.path(), &["evaluate", "--gt", "scene/ground_truth.csv", "--pred", "scene/ground_truth.csv"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = stdout(&o);
    for k in ["mota", "motp", "idf1", "idp", "idr", "recall", "precision"] {
        assert_eq!(number(&r, k), 1.0, "{k}");
    }
    assert_eq!(value(&r, "cha"), "NA");

    fs::write(t.path().join("none.csv"), "").unwrap();
    let o = mcmot(t.path(), &["evaluate", "--gt", "scene/ground_truth.csv", "--pred", "none.csv", "--matches", "none.csv"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = stdout(&o);
    assert_eq!(number(&r, "mota"), 0.0);
    assert_eq!(number(&r, "cha"), 0.0);
    assert_eq!(value(&r, "motp"), "NA");
}

#[test]
fn evaluate_hand_scenario() {
    let t = TempDir::new().unwrap();
    let gt = "ceiling,0,1,0,0,10,10\nceiling,0,2,100,0,10,10\nceiling,1,1,0,0,10,10\n\
              ceiling,1,2,100,0,10,10\nceiling,2,1,0,0,10,10\nceiling,2,2,100,0,10,10\n";
    let pred = "ceiling,0,1,0,0,10,10\nceiling,0,2,100,0,10,10\nceiling,1,1,0,0,10,10\n\
                ceiling,2,1,0,0,10,10\nceiling,2,3,100,0,10,10\n";
    fs::write(t.path().join("gt.csv"), gt).unwrap();
    fs::write(t.path().join("pred.csv"), pred).unwrap();
    let o = mcmot(t.path(), &["evaluate", "--gt", "gt.csv", "--pred", "pred.csv", "--iou-threshold", "0.5"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = stdout(&o);
    assert_eq!((value(&r, "fn"), value(&r, "fp"), value(&r, "idsw")), ("1".into(), "0".into(), "1".into()));
    assert_eq!(value(&r, "mota"), format!("{:.6}", 2.0 / 3.0));
}

#[test]
fn evaluate_local_tracks_per_camera() {
    let t = TempDir::new().unwrap();
    small_scene(t.path());
    for cam in ["ceiling", "angled"] {
        mcmot(t.path(), &["track", &format!("scene/{cam}_detections.csv"), "--confirm-hits", "1", "--out", &format!("{cam}.csv")]);
    }
    let o = mcmot(t.path(), &["evaluate", "--gt", "scene/ground_truth.csv", "--ceiling-tracks", "ceiling.csv", "--angled-tracks", "angled.csv"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(number(&stdout(&o), "mota"), 1.0);
    assert_eq!(number(&stdout(&o), "idf1"), 1.0);
}

fn pipeline_toml(extra: &str) -> String {
    format!("output_dir = \"run\"\naudit = true\n{extra}[simulate]\n{SMALL_PEN}")
}

#[test]
fn pipeline_runs_end_to_end() {
    let t = TempDir::new().unwrap();
    fs::write(t.path().join("p.toml"), pipeline_toml("")).unwrap();
    let o = mcmot(t.path(), &["pipeline", "--config", "p.toml"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = stdout(&o);
    assert_eq!(r, fs::read_to_string(t.path().join("run/report.txt")).unwrap());
    assert!(stderr(&o).contains("time_track_ms="));
    assert!(!r.contains("time_"));
    for f in ["homography.txt", "ceiling_tracks.csv", "angled_tracks.csv", "global_tracks.csv", "matches.csv", "audit.txt", "report.txt", "scene/manifest.toml"] {
        assert!(t.path().join("run").join(f).is_file(), "{f}");
    }
    let n = |k: &str| number(&r, k) as usize;
    for stage in ["detections", "local_tracks", "track_records"] {
        assert_eq!(n(&format!("{stage}_total")), n(&format!("{stage}_ceiling")) + n(&format!("{stage}_angled")));
    }
    assert!(n("global_ids") <= n("local_tracks_total"));
    assert_eq!(n("global_records"), n("track_records_total"));
    let matched: usize = formats::read_matches(&fs::read_to_string(t.path().join("run/matches.csv")).unwrap())
        .unwrap()
        .iter()
        .map(|m| m.matches.len())
        .sum();
    assert_eq!(n("matched_pairs"), matched);
    assert!(value(&r, "homography_inliers").ends_with(&format!("/{}", formats::read_correspondences(&fs::read_to_string(t.path().join("run/scene/correspondences.txt")).unwrap()).unwrap().len())));
    assert!(number(&r, "cha") > 0.9);
}

#[test]
fn pipeline_from_streams_without_homography_exits_2() {
    let t = TempDir::new().unwrap();
    small_scene(t.path());
    let base = "[streams]\nceiling = \"scene/ceiling_detections.csv\"\nangled = \"scene/angled_detections.csv\"\n";
    fs::write(t.path().join("p.toml"), base).unwrap();
    let o = mcmot(t.path(), &["pipeline", "--config", "p.toml"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("homography"));

    let with_h = format!("{base}ground_truth = \"scene/ground_truth.csv\"\n[homography]\ncorrespondences = \"scene/correspondences.txt\"\n");
    fs::write(t.path().join("p.toml"), with_h).unwrap();
    let o = mcmot(t.path(), &["pipeline", "--config", "p.toml", "--out", "elsewhere"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(t.path().join("elsewhere/global_tracks.csv").is_file());
    assert!(number(&stdout(&o), "mota") > 0.9);
}

#[test]
fn pipeline_matches_the_library_on_a_simulated_scene() {
    let t = TempDir::new().unwrap();
    fs::write(t.path().join("p.toml"), pipeline_toml("seed = 5\n[homography]\nexact = true\n")).unwrap();
    let o = mcmot(t.path(), &["pipeline", "--config", "p.toml"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let pen: PenConfig = toml::from_str(&format!("seed = 5\n{SMALL_PEN}")).unwrap();
    let s = simulate(&pen).unwrap();
    let tracks = mcmot::pipeline::track_both(&[s.ceiling_detections, s.angled_detections], &Default::default()).unwrap();
    let run = mcmot::pipeline::align(&tracks, &s.h_ceiling_to_angled, 0, &GlobalConfig::default()).unwrap();
    assert_eq!(fs::read_to_string(t.path().join("run/global_tracks.csv")).unwrap(), formats::write_global(&run.records));
}
