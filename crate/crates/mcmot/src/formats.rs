//! Text formats for detections, tracks, ground truth, matches, homographies
//! and correspondences.
//!
//! CSV readers accept an optional header line and `#` comments. Writers
//! emit a header and six fractional digits, which readers take back
//! without loss.

use std::fmt::Write as _;

use mcmot_core::geometry::{Correspondence, Homography, PixelPoint};
use mcmot_core::global_tracker::{Camera, FrameMatches, GlobalRecord, MatchSet};
use mcmot_core::local_tracker::{Detection, LocalId, TrackRecord};
use mcmot_core::metrics::AnnotatedBox;
use mcmot_core::polygons::BoundingBox;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}: {message}")]
pub struct FormatError {
    pub line: u64,
    pub message: String,
}

fn err(line: u64, message: impl Into<String>) -> FormatError {
    FormatError {
        line,
        message: message.into(),
    }
}

pub const DETECTION_HEADER: &str = "frame,x_min,y_min,width,height,confidence";
pub const TRACK_HEADER: &str = "frame,local_id,x_min,y_min,width,height";
pub const GLOBAL_HEADER: &str = "camera,frame,global_id,x_min,y_min,width,height";
pub const MATCH_HEADER: &str = "ceiling_frame,angled_frame,ceiling_local_id,angled_local_id";

/// Parsed CSV record with its 1-based line number.
struct Row {
    line: u64,
    fields: Vec<String>,
}

impl Row {
    fn get(&self, i: usize) -> &str {
        &self.fields[i]
    }

    fn parse<T: std::str::FromStr>(&self, i: usize, name: &str) -> Result<T, FormatError> {
        self.get(i)
            .parse()
            .map_err(|_| err(self.line, format!("cannot parse {name} from {:?}", self.get(i))))
    }

    fn real(&self, i: usize, name: &str) -> Result<f64, FormatError> {
        let v: f64 = self.parse(i, name)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(err(self.line, format!("{name} is not finite")))
        }
    }

    fn bbox(&self, first: usize) -> Result<BoundingBox, FormatError> {
        let x = self.real(first, "x_min")?;
        let y = self.real(first + 1, "y_min")?;
        let w = self.real(first + 2, "width")?;
        let h = self.real(first + 3, "height")?;
        BoundingBox::from_xywh(x, y, w, h).map_err(|e| err(self.line, e.to_string()))
    }
}

/// Splits CSV text into rows of exactly `width` fields, or at least
/// `width` when `at_least` is set. A first row without a single number or
/// camera name is taken as a header and skipped.
fn rows(text: &str, width: usize, at_least: bool) -> Result<Vec<Row>, FormatError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| err(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if i == 0 && rec.iter().all(|f| f.parse::<f64>().is_err() && !is_camera(f)) {
            continue;
        }
        if rec.len() < width || (!at_least && rec.len() != width) {
            return Err(err(line, format!("expected {width} fields, found {}", rec.len())));
        }
        out.push(Row {
            line,
            fields: rec.iter().map(str::to_owned).collect(),
        });
    }
    Ok(out)
}

fn is_camera(field: &str) -> bool {
    field.parse::<Camera>().is_ok()
}

fn csv_text(header: &str, lines: impl IntoIterator<Item = String>) -> String {
    let mut s = String::from(header);
    s.push('\n');
    for l in lines {
        s.push_str(&l);
        s.push('\n');
    }
    s
}

fn xywh(b: &BoundingBox) -> String {
    format!("{:.6},{:.6},{:.6},{:.6}", b.x_min, b.y_min, b.width(), b.height())
}

fn check_sorted(rows: &[Row], frames: &[u32]) -> Result<(), FormatError> {
    for (w, r) in frames.windows(2).zip(rows.iter().skip(1)) {
        if w[1] < w[0] {
            return Err(err(r.line, format!("frame {} after frame {}; frames must be ascending", w[1], w[0])));
        }
    }
    Ok(())
}

/// `frame,x_min,y_min,width,height,confidence`, frames ascending.
pub fn read_detections(text: &str) -> Result<Vec<Detection>, FormatError> {
    let rows = rows(text, 6, false)?;
    let mut out = Vec::with_capacity(rows.len());
    for r in &rows {
        let d = Detection::new(r.parse(0, "frame")?, r.bbox(1)?, r.real(5, "confidence")?).map_err(|e| err(r.line, e.to_string()))?;
        out.push(d);
    }
    check_sorted(&rows, &out.iter().map(|d| d.frame).collect::<Vec<_>>())?;
    Ok(out)
}

pub fn write_detections(dets: &[Detection]) -> String {
    csv_text(DETECTION_HEADER, dets.iter().map(|d| format!("{},{},{:.6}", d.frame, xywh(&d.bbox), d.confidence)))
}

/// Appearance sidecar `frame,det_index,v1,...,vk`. `det_index` counts the
/// detections of that frame in file order. Vectors are scaled to unit
/// length, since six-digit text rarely keeps the norm within tolerance.
pub fn read_appearance(text: &str, dets: &mut [Detection]) -> Result<(), FormatError> {
    let mut first_of_frame = std::collections::BTreeMap::new();
    for (i, d) in dets.iter().enumerate() {
        first_of_frame.entry(d.frame).or_insert(i);
    }
    for r in rows(text, 3, true)? {
        let frame: u32 = r.parse(0, "frame")?;
        let k: usize = r.parse(1, "det_index")?;
        let idx = first_of_frame
            .get(&frame)
            .map(|&i| i + k)
            .filter(|&i| i < dets.len() && dets[i].frame == frame)
            .ok_or_else(|| err(r.line, format!("no detection {k} in frame {frame}")))?;
        let v = (2..r.fields.len()).map(|i| r.real(i, "appearance")).collect::<Result<Vec<_>, _>>()?;
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(err(r.line, "appearance vector is zero"));
        }
        let unit = v.iter().map(|x| x / norm).collect();
        dets[idx] = dets[idx].clone().with_appearance(unit).map_err(|e| err(r.line, e.to_string()))?;
    }
    Ok(())
}

pub fn write_appearance(dets: &[Detection]) -> String {
    let mut s = String::new();
    let mut k = 0;
    let mut frame = None;
    for d in dets {
        if frame != Some(d.frame) {
            frame = Some(d.frame);
            k = 0;
        }
        if let Some(v) = &d.appearance {
            let _ = write!(s, "{},{}", d.frame, k);
            for x in v {
                let _ = write!(s, ",{x:.6}");
            }
            s.push('\n');
        }
        k += 1;
    }
    s
}

/// `frame,local_id,x_min,y_min,width,height`.
pub fn read_tracks(text: &str) -> Result<Vec<TrackRecord>, FormatError> {
    let rows = rows(text, 6, false)?;
    let out = rows
        .iter()
        .map(|r| {
            Ok(TrackRecord {
                frame: r.parse(0, "frame")?,
                local_id: LocalId(r.parse(1, "local_id")?),
                bbox: r.bbox(2)?,
            })
        })
        .collect::<Result<Vec<_>, FormatError>>()?;
    check_sorted(&rows, &out.iter().map(|t| t.frame).collect::<Vec<_>>())?;
    Ok(out)
}

pub fn write_tracks(tracks: &[TrackRecord]) -> String {
    csv_text(TRACK_HEADER, tracks.iter().map(|t| format!("{},{},{}", t.frame, t.local_id, xywh(&t.bbox))))
}

/// `camera,frame,global_id,x_min,y_min,width,height`; used for both
/// ground truth and global track output.
pub fn read_annotated(text: &str) -> Result<Vec<AnnotatedBox>, FormatError> {
    rows(text, 7, false)?
        .iter()
        .map(|r| {
            Ok(AnnotatedBox {
                camera: r.get(0).parse().map_err(|e: mcmot_core::global_tracker::UnknownCamera| err(r.line, e.to_string()))?,
                frame: r.parse(1, "frame")?,
                identity: r.parse(2, "global_id")?,
                bbox: r.bbox(3)?,
            })
        })
        .collect()
}

pub fn write_annotated(boxes: &[AnnotatedBox]) -> String {
    csv_text(
        GLOBAL_HEADER,
        boxes.iter().map(|b| format!("{},{},{},{}", b.camera, b.frame, b.identity, xywh(&b.bbox))),
    )
}

pub fn write_global(records: &[GlobalRecord]) -> String {
    let boxes: Vec<AnnotatedBox> = records.iter().copied().map(Into::into).collect();
    write_annotated(&boxes)
}

/// `ceiling_frame,angled_frame,ceiling_local_id,angled_local_id`, one line
/// per matched pair.
pub fn read_matches(text: &str) -> Result<Vec<FrameMatches>, FormatError> {
    let mut out: Vec<FrameMatches> = Vec::new();
    for r in rows(text, 4, false)? {
        let cf: i64 = r.parse(0, "ceiling_frame")?;
        let af: i64 = r.parse(1, "angled_frame")?;
        let c = LocalId(r.parse(2, "ceiling_local_id")?);
        let a = LocalId(r.parse(3, "angled_local_id")?);
        match out.last_mut() {
            Some(fm) if fm.ceiling_frame == cf && fm.angled_frame == af => {}
            Some(fm) if fm.ceiling_frame >= cf => {
                return Err(err(r.line, "match frames must be ascending and grouped"));
            }
            _ => out.push(FrameMatches {
                ceiling_frame: cf,
                angled_frame: af,
                matches: MatchSet::new(),
            }),
        }
        let fm = out.last_mut().expect("pushed above");
        if !fm.matches.insert(c, a) {
            return Err(err(r.line, format!("local {c} or {a} matched twice in one frame")));
        }
    }
    Ok(out)
}

pub fn write_matches(matches: &[FrameMatches]) -> String {
    csv_text(
        MATCH_HEADER,
        matches
            .iter()
            .flat_map(|fm| fm.matches.iter().map(move |(c, a)| format!("{},{},{},{}", fm.ceiling_frame, fm.angled_frame, c, a))),
    )
}

/// Whitespace-separated numbers, skipping blank and `#` lines.
fn number_lines(text: &str) -> impl Iterator<Item = (u64, Vec<&str>)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i as u64 + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .map(|(i, l)| (i, l.split_whitespace().collect()))
}

fn number(line: u64, s: &str) -> Result<f64, FormatError> {
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| err(line, format!("not a finite number: {s:?}")))
}

/// Nine numbers, row-major, in any line layout.
pub fn read_homography(text: &str) -> Result<Homography, FormatError> {
    let mut v = Vec::with_capacity(9);
    let mut last = 0;
    for (line, fields) in number_lines(text) {
        last = line;
        for f in fields {
            v.push(number(line, f)?);
        }
    }
    if v.len() != 9 {
        return Err(err(last, format!("expected 9 numbers, found {}", v.len())));
    }
    Homography::from_rows([[v[0], v[1], v[2]], [v[3], v[4], v[5]], [v[6], v[7], v[8]]]).map_err(|e| err(last, e.to_string()))
}

/// Canonical matrix, one row per line, in shortest round-trip form so the
/// file reads back bit for bit.
pub fn write_homography(h: &Homography, comment: Option<&str>) -> String {
    let mut s = String::new();
    if let Some(c) = comment {
        for l in c.lines() {
            let _ = writeln!(s, "# {l}");
        }
    }
    for row in h.rows() {
        let _ = writeln!(s, "{} {} {}", row[0], row[1], row[2]);
    }
    s
}

/// `src_x src_y dst_x dst_y` per line.
pub fn read_correspondences(text: &str) -> Result<Vec<Correspondence>, FormatError> {
    number_lines(text)
        .map(|(line, f)| {
            if f.len() != 4 {
                return Err(err(line, format!("expected 4 numbers, found {}", f.len())));
            }
            let v = f.iter().map(|s| number(line, s)).collect::<Result<Vec<_>, _>>()?;
            Ok(Correspondence::new(PixelPoint::new(v[0], v[1]), PixelPoint::new(v[2], v[3])))
        })
        .collect()
}

pub fn write_correspondences(pairs: &[Correspondence]) -> String {
    let mut s = String::from("# src_x src_y dst_x dst_y\n");
    for p in pairs {
        let _ = writeln!(s, "{} {} {} {}", p.src.x, p.src.y, p.dst.x, p.dst.y);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn detections_with_and_without_header() {
        let body = "0,10,20,30,40,0.9\n0,1.5,2,3,4,1\n2,0,0,1,1,0.5\n";
        let a = read_detections(body).unwrap();
        let b = read_detections(&format!("{DETECTION_HEADER}\n{body}")).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);
        assert_eq!(a[0].bbox, BoundingBox::new(10.0, 20.0, 40.0, 60.0).unwrap());
        assert!(read_detections("").unwrap().is_empty());
    }

    #[test]
    fn malformed_lines_are_reported_with_position() {
        let e = read_detections("0,1,1,5,5,0.5\n3,1,1,5,5,0.5\n1,1,1,5,5,0.5\n").unwrap_err();
        assert_eq!(e.line, 3);
        assert!(e.message.contains("ascending"));
        assert_eq!(read_detections("0,1,1,0,5,0.5\n").unwrap_err().line, 1);
        assert_eq!(read_detections("0,1,1,5,5\n").unwrap_err().line, 1);
        assert_eq!(read_detections("0,1,1,5,5,2.0\n").unwrap_err().line, 1);
        assert!(read_detections("0,1,x,5,5,0.5\n").unwrap_err().message.contains("y_min"));
        assert!(read_annotated("side,0,1,0,0,1,1\n").is_err());
    }

    #[test]
    fn appearance_sidecar_attaches_by_frame_index() {
        let mut d = read_detections("0,0,0,1,1,1\n0,5,5,1,1,1\n1,0,0,1,1,1\n").unwrap();
        read_appearance("0,1,3,4\n1,0,0,2\n", &mut d).unwrap();
        assert_eq!(d[0].appearance, None);
        assert_eq!(d[1].appearance, Some(vec![0.6, 0.8]));
        assert_eq!(d[2].appearance, Some(vec![0.0, 1.0]));
        assert!(read_appearance("0,2,1,0\n", &mut d).is_err());
        assert_eq!(write_appearance(&d), "0,1,0.600000,0.800000\n1,0,0.000000,1.000000\n");
    }

    #[test]
    fn homography_text() {
        let h = read_homography("# from a test\n1 0 3\n0 1 4\n0 0 1\n").unwrap();
        assert_eq!(h, Homography::translation(3.0, 4.0));
        assert_eq!(read_homography(&write_homography(&h, Some("x\ny"))).unwrap(), h);
        assert!(read_homography("1 0 0\n0 1 0\n").is_err());
        assert!(read_homography("1 0 0\n0 1 0\n0 0 0\n").is_err());
    }

    #[test]
    fn match_groups() {
        let text = "0,0,1,2\n0,0,3,4\n1,1,1,2\n";
        let m = read_matches(text).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m[0].matches.len(), 2);
        assert_eq!(write_matches(&m), format!("{MATCH_HEADER}\n{text}"));
        assert!(read_matches("0,0,1,2\n0,0,1,5\n").is_err());
        assert!(read_matches("1,1,1,2\n0,0,3,4\n").is_err());
    }

    fn six(v: i64) -> f64 {
        v as f64 / 1e6
    }

    fn boxes() -> impl Strategy<Value = BoundingBox> {
        (0i64..4_000_000_000, 0i64..2_000_000_000, 1i64..500_000_000, 1i64..500_000_000)
            .prop_map(|(x, y, w, h)| BoundingBox::from_xywh(six(x), six(y), six(w), six(h)).unwrap())
    }

    proptest! {
        #[test]
        fn detections_round_trip(mut raw in proptest::collection::vec((0u32..50, boxes(), 0i64..=1_000_000), 0..40)) {
            raw.sort_by_key(|r| r.0);
            let dets: Vec<Detection> = raw.iter().map(|&(f, b, c)| Detection::new(f, b, six(c)).unwrap()).collect();
            let text = write_detections(&dets);
            let back = read_detections(&text).unwrap();
            prop_assert_eq!(write_detections(&back), text);
            for (a, b) in dets.iter().zip(&back) {
                prop_assert_eq!(a.frame, b.frame);
                prop_assert!((a.bbox.x_min - b.bbox.x_min).abs() < 1e-9 && (a.bbox.height() - b.bbox.height()).abs() < 1e-9);
            }
        }

        #[test]
        fn tracks_round_trip(mut raw in proptest::collection::vec((0u32..1000, 0u32..100, boxes()), 0..40)) {
            raw.sort_by_key(|r| r.0);
            let t: Vec<TrackRecord> = raw.iter().map(|&(frame, id, bbox)| TrackRecord { frame, local_id: LocalId(id), bbox }).collect();
            let text = write_tracks(&t);
            let back = read_tracks(&text).unwrap();
            prop_assert_eq!(back.len(), t.len());
            prop_assert_eq!(write_tracks(&back), text);
        }

        #[test]
        fn annotated_round_trip(raw in proptest::collection::vec((any::<bool>(), 0u32..1000, 0u32..100, boxes()), 0..40)) {
            let b: Vec<AnnotatedBox> = raw
                .iter()
                .map(|&(c, frame, identity, bbox)| AnnotatedBox { camera: if c { Camera::Ceiling } else { Camera::Angled }, frame, identity, bbox })
                .collect();
            let text = write_annotated(&b);
            let back = read_annotated(&text).unwrap();
            prop_assert_eq!(back.iter().map(|x| (x.camera, x.frame, x.identity)).collect::<Vec<_>>(), b.iter().map(|x| (x.camera, x.frame, x.identity)).collect::<Vec<_>>());
            prop_assert_eq!(write_annotated(&back), text);
        }

        #[test]
        fn homography_round_trip_is_exact(v in proptest::array::uniform9(-10.0f64..10.0)) {
            if let Ok(h) = Homography::from_rows([[v[0], v[1], v[2]], [v[3], v[4], v[5]], [v[6], v[7], v[8]]]) {
                prop_assert_eq!(read_homography(&write_homography(&h, Some("c"))).unwrap(), h);
            }
        }

        #[test]
        fn correspondences_round_trip_is_exact(raw in proptest::collection::vec(proptest::array::uniform4(-1e4f64..1e4), 0..30)) {
            let pairs: Vec<Correspondence> = raw.iter().map(|v| Correspondence::new(PixelPoint::new(v[0], v[1]), PixelPoint::new(v[2], v[3]))).collect();
            prop_assert_eq!(read_correspondences(&write_correspondences(&pairs)).unwrap(), pairs);
        }

        #[test]
        fn matches_round_trip(frames in proptest::collection::btree_map(0i64..500, proptest::collection::btree_map(0u32..30, 0u32..30, 1..5), 0..20)) {
            let m: Vec<FrameMatches> = frames
                .into_iter()
                .map(|(f, pairs)| FrameMatches {
                    ceiling_frame: f,
                    angled_frame: f + 3,
                    matches: pairs.into_iter().map(|(c, a)| (LocalId(c), LocalId(a))).collect(),
                })
                .filter(|fm| !fm.matches.is_empty())
                .collect();
            prop_assert_eq!(read_matches(&write_matches(&m)).unwrap(), m);
        }
    }
}
