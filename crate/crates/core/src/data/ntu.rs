//! Adapter for the NTU RGB+D `.skeleton` text format.
//!
//! ```text
//! <frame count>
//! per frame:
//!   <body count>
//!   per body:
//!     <bodyID> <clippedEdges> <handLeftConf> <handLeftState> <handRightConf>
//!         <handRightState> <isRestricted> <leanX> <leanY> <trackingState>
//!     <joint count = 25>
//!     25 x: <x> <y> <z> <depthX> <depthY> <colorX> <colorY>
//!           <orientW> <orientX> <orientY> <orientZ> <trackingState>
//! ```
//!
//! Only the camera-space position (first three floats of each joint line) is
//! kept. File names look like `S001C002P003R002A013.skeleton`: setup, camera,
//! performer (subject), replication and one-based action class.

use std::path::Path;

use crate::data::N_JOINTS;
use crate::{Error, Result};

/// Ids encoded in an NTU file name.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FileIds {
    pub setup: u32,
    pub camera: u32,
    pub subject: u32,
    pub replication: u32,
    /// Zero-based action class (`A001` -> 0).
    pub action_class: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawBody {
    pub body_id: String,
    pub joints: Vec<[f32; 3]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawRecording {
    pub name: String,
    /// Bodies tracked in each frame.
    pub frames: Vec<Vec<RawBody>>,
    pub ids: FileIds,
}

impl RawRecording {
    pub fn body_count_per_frame(&self) -> Vec<usize> {
        self.frames.iter().map(Vec::len).collect()
    }

    pub fn max_body_count(&self) -> usize {
        self.frames.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn action_class(&self) -> usize {
        self.ids.action_class
    }

    pub fn subject_id(&self) -> u32 {
        self.ids.subject
    }
}

/// Parses the id tokens of a file name such as `S001C002P003R002A013.skeleton`.
pub fn parse_ntu_filename(name: &str) -> Result<FileIds> {
    let stem = name
        .rsplit(['/', '\\'])
        .next()
        .unwrap_or(name)
        .split('.')
        .next()
        .unwrap_or_default();
    let field = |prefix: char| -> Option<u32> {
        let start = stem.find(prefix)? + 1;
        let digits: String = stem[start..].chars().take_while(char::is_ascii_digit).collect();
        digits.parse().ok()
    };
    let missing = |what: &str| Error::Data(format!("file name {name:?} has no {what} token"));
    let action = field('A').ok_or_else(|| missing("action (A)"))?;
    let subject = field('P').ok_or_else(|| missing("performer (P)"))?;
    if !(1..=120).contains(&action) {
        return Err(Error::Data(format!("action token A{action:03} out of range in {name:?}")));
    }
    Ok(FileIds {
        setup: field('S').unwrap_or(0),
        camera: field('C').unwrap_or(0),
        subject,
        replication: field('R').unwrap_or(0),
        action_class: action as usize - 1,
    })
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self, what: &str) -> Result<(usize, &'a str)> {
        for (i, line) in self.inner.by_ref() {
            self.last = i + 1;
            if !line.trim().is_empty() {
                return Ok((i + 1, line));
            }
        }
        Err(Error::parse(self.last + 1, format!("unexpected end of file, expected {what}")))
    }

    fn count(&mut self, what: &str) -> Result<usize> {
        let (n, line) = self.next(what)?;
        line.trim()
            .parse()
            .map_err(|_| Error::parse(n, format!("expected {what}, found {:?}", line.trim())))
    }
}

/// Parses the content of one `.skeleton` file.
pub fn parse_ntu_skeleton(text: &str, ids: FileIds, name: &str) -> Result<RawRecording> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        last: 0,
    };
    let n_frames = lines.count("frame count")?;
    let mut frames = Vec::with_capacity(n_frames);
    for _ in 0..n_frames {
        let n_bodies = lines.count("body count")?;
        let mut bodies = Vec::with_capacity(n_bodies);
        for _ in 0..n_bodies {
            let (n, info) = lines.next("body info line")?;
            let body_id = info
                .split_whitespace()
                .next()
                .ok_or_else(|| Error::parse(n, "empty body info line"))?
                .to_string();
            let (jn, jline) = lines.next("joint count")?;
            let n_joints: usize = jline
                .trim()
                .parse()
                .map_err(|_| Error::parse(jn, format!("expected joint count, found {:?}", jline.trim())))?;
            if n_joints != N_JOINTS {
                return Err(Error::Data(format!(
                    "{name}: line {jn}: body has {n_joints} joints, expected {N_JOINTS}"
                )));
            }
            let mut joints = Vec::with_capacity(N_JOINTS);
            for _ in 0..N_JOINTS {
                let (ln, line) = lines.next("joint line")?;
                let mut xyz = [0f32; 3];
                let mut fields = line.split_whitespace();
                for v in xyz.iter_mut() {
                    let tok = fields
                        .next()
                        .ok_or_else(|| Error::parse(ln, "joint line has fewer than 3 fields"))?;
                    let parsed: f64 = tok
                        .parse()
                        .map_err(|_| Error::parse(ln, format!("invalid coordinate {tok:?}")))?;
                    if !parsed.is_finite() {
                        return Err(Error::Data(format!("{name}: line {ln}: non-finite coordinate {tok}")));
                    }
                    *v = parsed as f32;
                }
                joints.push(xyz);
            }
            bodies.push(RawBody { body_id, joints });
        }
        frames.push(bodies);
    }
    Ok(RawRecording {
        name: name.to_string(),
        frames,
        ids,
    })
}

/// Reads every `*.skeleton` file of `dir`, in sorted file-name order.
pub fn read_ntu_dir(dir: impl AsRef<Path>) -> Result<Vec<RawRecording>> {
    let mut paths: Vec<_> = std::fs::read_dir(dir.as_ref())?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    paths.retain(|p| p.extension().is_some_and(|x| x == "skeleton"));
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Data(format!("no .skeleton files in {}", dir.as_ref().display())));
    }
    paths
        .iter()
        .map(|p| {
            let name = p.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_owned();
            let ids = parse_ntu_filename(&name)?;
            let text = std::fs::read_to_string(p)?;
            parse_ntu_skeleton(&text, ids, &name)
        })
        .collect()
}
