//! `metric=value` reports.

use std::fmt::Write as _;
use std::time::Duration;

use mcmot_core::metrics::MetricsReport;

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_owned(), |x| format!("{x:.6}"))
}

fn pct(v: Option<f64>) -> String {
    opt(v.map(|x| 100.0 * x))
}

/// Header of the summary block; values follow on the next line, in percent.
pub const SUMMARY_COLUMNS: &str = "IDF1,IDP,IDR,Recall,Precision,MOTA,MOTP,CHA";

/// Metric lines followed by a `[summary]` block with the table columns.
pub fn render_metrics(r: &MetricsReport) -> String {
    let c = &r.counts;
    let mut s = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(s, "{k}={v}");
    };
    kv("gt", c.gt.to_string());
    kv("pred", c.pred.to_string());
    kv("matched", c.matched_count.to_string());
    kv("fn", c.fn_count.to_string());
    kv("fp", c.fp.to_string());
    kv("idsw", c.idsw.to_string());
    kv("mota", opt(Some(r.mota)));
    kv("motp", opt(r.motp));
    kv("precision", opt(r.precision));
    kv("recall", opt(Some(r.recall)));
    kv("idf1", opt(Some(r.id.idf1)));
    kv("idp", opt(Some(r.id.idp)));
    kv("idr", opt(Some(r.id.idr)));
    kv("idtp", r.id.idtp.to_string());
    kv("cha", opt(r.cha.map(|h| h.cha)));
    if let Some(h) = r.cha {
        kv("cha_correct", h.correct.to_string());
        kv("cha_gt_pairs", h.gt_pairs.to_string());
        kv("cha_predicted", h.predicted.to_string());
    }
    let row = [
        Some(r.id.idf1),
        Some(r.id.idp),
        Some(r.id.idr),
        Some(r.recall),
        r.precision,
        Some(r.mota),
        r.motp,
        r.cha.map(|h| h.cha),
    ]
    .map(pct)
    .join(",");
    let _ = write!(s, "\n[summary]\n{SUMMARY_COLUMNS}\n{row}\n");
    s
}

/// Per-camera sizes of every pipeline stage.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StageCounts {
    pub frames: [u32; 2],
    pub detections: [usize; 2],
    pub local_tracks: [usize; 2],
    pub track_records: [usize; 2],
    pub global_ids: u32,
    pub global_records: usize,
    pub matched_pairs: usize,
    pub homography_inliers: Option<(usize, usize)>,
}

#[derive(Debug, Clone, Default)]
pub struct RunReport {
    pub counts: StageCounts,
    pub timings: Vec<(&'static str, Duration)>,
    pub metrics: Option<MetricsReport>,
}

impl RunReport {
    /// Counts and metrics; timings are left out so reruns compare equal.
    pub fn render(&self) -> String {
        let c = &self.counts;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k}={v}");
        };
        let per = |a: [usize; 2]| [a[0].to_string(), a[1].to_string(), (a[0] + a[1]).to_string()];
        kv("frames_ceiling", c.frames[0].to_string());
        kv("frames_angled", c.frames[1].to_string());
        for (name, v) in [("detections", c.detections), ("local_tracks", c.local_tracks), ("track_records", c.track_records)] {
            let [a, b, t] = per(v);
            kv(&format!("{name}_ceiling"), a);
            kv(&format!("{name}_angled"), b);
            kv(&format!("{name}_total"), t);
        }
        kv("global_ids", c.global_ids.to_string());
        kv("global_records", c.global_records.to_string());
        kv("matched_pairs", c.matched_pairs.to_string());
        if let Some((n, of)) = c.homography_inliers {
            kv("homography_inliers", format!("{n}/{of}"));
        }
        if let Some(m) = &self.metrics {
            s.push_str(&render_metrics(m));
        }
        s
    }

    pub fn render_timings(&self) -> String {
        let mut s = String::new();
        for (stage, d) in &self.timings {
            let _ = writeln!(s, "time_{stage}_ms={:.3}", d.as_secs_f64() * 1e3);
        }
        s
    }
}
