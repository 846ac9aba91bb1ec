//! Head-pose sequences and the transforms applied to them.
//!
//! A pose frame is a 3-vector of rotation parameters (radians about the
//! x-, y-, z-axes) produced by an upstream 3D face-model fitter. Frames
//! are treated as plain Euclidean 3-vectors: mean subtraction and
//! mirroring act component-wise. Sequences are sampled at 25 fps; a
//! 10-second utterance is exactly 250 frames.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Frames per second for all pose data handled by this crate.
pub const FPS: u32 = 25;

/// Frames in one 10-second utterance at 25 fps.
pub const UTTERANCE_FRAMES: usize = 250;

/// One rotation axis of the head-pose parameterization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Axis::X => write!(f, "x"),
            Axis::Y => write!(f, "y"),
            Axis::Z => write!(f, "z"),
        }
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x" | "X" => Ok(Axis::X),
            "y" | "Y" => Ok(Axis::Y),
            "z" | "Z" => Ok(Axis::Z),
            other => Err(Error::InvalidValue(format!("unknown axis {other:?}"))),
        }
    }
}

/// Rotation parameters for one video frame, in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseFrame {
    pub rx: f64,
    pub ry: f64,
    pub rz: f64,
}

impl PoseFrame {
    pub const ZERO: PoseFrame = PoseFrame {
        rx: 0.0,
        ry: 0.0,
        rz: 0.0,
    };

    pub fn new(rx: f64, ry: f64, rz: f64) -> Self {
        PoseFrame { rx, ry, rz }
    }

    /// Construct with the ingestion invariant: all components finite and
    /// |component| < pi. Model outputs are not forced through this check
    /// (an untrained network can legitimately produce larger values).
    pub fn validated(rx: f64, ry: f64, rz: f64) -> Result<Self> {
        for (name, v) in [("rx", rx), ("ry", ry), ("rz", rz)] {
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("pose component {name}")));
            }
            if v.abs() >= std::f64::consts::PI {
                return Err(Error::InvalidValue(format!(
                    "pose component {name} = {v} out of (-pi, pi)"
                )));
            }
        }
        Ok(PoseFrame { rx, ry, rz })
    }

    #[inline]
    pub fn component(&self, axis: Axis) -> f64 {
        match axis {
            Axis::X => self.rx,
            Axis::Y => self.ry,
            Axis::Z => self.rz,
        }
    }

    #[inline]
    pub fn as_array(&self) -> [f64; 3] {
        [self.rx, self.ry, self.rz]
    }

    fn sub(&self, other: &PoseFrame) -> PoseFrame {
        PoseFrame {
            rx: self.rx - other.rx,
            ry: self.ry - other.ry,
            rz: self.rz - other.rz,
        }
    }
}

/// An ordered pose sequence at 25 fps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseSequence {
    frames: Vec<PoseFrame>,
}

impl PoseSequence {
    /// A sequence must be nonempty; the frame rate is fixed at 25 fps and
    /// data at any other rate is rejected upstream rather than resampled.
    pub fn new(frames: Vec<PoseFrame>) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::EmptyInput("pose sequence"));
        }
        Ok(PoseSequence { frames })
    }

    pub fn frames(&self) -> &[PoseFrame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn fps(&self) -> u32 {
        FPS
    }

    /// Flatten to a T*3 vector, row-major (frame-major).
    pub fn flattened(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.frames.len() * 3);
        for f in &self.frames {
            out.extend_from_slice(&f.as_array());
        }
        out
    }
}

/// Component-wise arithmetic mean over all frames of all sequences.
///
/// The inputs are expected to come from one source video; the result is
/// the video's mean pose.
pub fn compute_mean_pose(sequences: &[PoseSequence]) -> Result<PoseFrame> {
    let total: usize = sequences.iter().map(|s| s.len()).sum();
    if total == 0 {
        return Err(Error::EmptyInput("no frames"));
    }
    let mut sum = [0.0f64; 3];
    for seq in sequences {
        for f in seq.frames() {
            sum[0] += f.rx;
            sum[1] += f.ry;
            sum[2] += f.rz;
        }
    }
    let n = total as f64;
    Ok(PoseFrame::new(sum[0] / n, sum[1] / n, sum[2] / n))
}

/// Subtract `mean` from every frame. Length and frame rate are unchanged.
pub fn normalize_poses(seq: &PoseSequence, mean: &PoseFrame) -> PoseSequence {
    PoseSequence {
        frames: seq.frames.iter().map(|f| f.sub(mean)).collect(),
    }
}

/// Negate the chosen axis's component in every frame.
///
/// Mirroring is an involution and preserves per-axis absolute values.
pub fn mirror(seq: &PoseSequence, axis: Axis) -> PoseSequence {
    let frames = seq
        .frames
        .iter()
        .map(|f| {
            let mut a = f.as_array();
            a[axis.index()] = -a[axis.index()];
            PoseFrame::new(a[0], a[1], a[2])
        })
        .collect();
    PoseSequence { frames }
}

/// Pose file contents keyed by 0-based frame index.
///
/// Files written by this crate are contiguous, but readers tolerate gaps:
/// the upstream pose fitter can fail on individual frames, and utterance
/// segmentation discards windows with missing frames.
pub type PoseTable = BTreeMap<u64, PoseFrame>;

/// Read a pose CSV (`frame,rx,ry,rz`, radians, 0-based frame indices).
pub fn read_pose_csv(path: &Path) -> Result<PoseTable> {
    let display = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|e| Error::io(&display, e))?;
    let reader = BufReader::new(file);
    let mut table = PoseTable::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(&display, e))?;
        let line = line.trim();
        if lineno == 0 {
            if line != "frame,rx,ry,rz" {
                return Err(Error::Parse {
                    path: display,
                    line: 1,
                    message: format!("expected header 'frame,rx,ry,rz', got {line:?}"),
                });
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: display.clone(),
            line: lineno + 1,
            message,
        };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(parse_err(format!("expected 4 fields, got {}", fields.len())));
        }
        let frame: u64 = fields[0]
            .parse()
            .map_err(|e| parse_err(format!("bad frame index: {e}")))?;
        let mut vals = [0.0f64; 3];
        for (i, v) in vals.iter_mut().enumerate() {
            *v = fields[i + 1]
                .parse()
                .map_err(|e| parse_err(format!("bad value: {e}")))?;
        }
        let pose = PoseFrame::validated(vals[0], vals[1], vals[2])?;
        if table.insert(frame, pose).is_some() {
            return Err(parse_err(format!("duplicate frame index {frame}")));
        }
    }
    if table.is_empty() {
        return Err(Error::EmptyInput("pose file has no data rows"));
    }
    Ok(table)
}

/// Write a pose sequence as CSV with contiguous 0-based frame indices.
pub fn write_pose_csv(path: &Path, seq: &PoseSequence) -> Result<()> {
    let display = path.display().to_string();
    let mut out = String::from("frame,rx,ry,rz\n");
    for (i, f) in seq.frames().iter().enumerate() {
        out.push_str(&format!("{},{},{},{}\n", i, f.rx, f.ry, f.rz));
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(&display, e))?;
    file.write_all(out.as_bytes())
        .map_err(|e| Error::io(&display, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn seq(frames: &[[f64; 3]]) -> PoseSequence {
        PoseSequence::new(
            frames
                .iter()
                .map(|f| PoseFrame::new(f[0], f[1], f[2]))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn mean_pose_arithmetic() {
        let s = seq(&[[0.1, 0.0, 0.0], [0.3, 0.0, 0.0]]);
        let m = compute_mean_pose(&[s]).unwrap();
        assert!((m.rx - 0.2).abs() < 1e-15);
        assert_eq!(m.ry, 0.0);
        assert_eq!(m.rz, 0.0);
    }

    #[test]
    fn mean_pose_single_frame_is_identity() {
        let s = seq(&[[0.4, -0.2, 0.05]]);
        let m = compute_mean_pose(&[s]).unwrap();
        assert_eq!(m.as_array(), [0.4, -0.2, 0.05]);
    }

    #[test]
    fn mean_pose_symmetric_frames_cancel() {
        let s = seq(&[[0.2, -0.1, 0.3], [-0.2, 0.1, -0.3]]);
        let m = compute_mean_pose(&[s]).unwrap();
        assert!(m.rx.abs() < 1e-15);
        assert!(m.ry.abs() < 1e-15);
        assert!(m.rz.abs() < 1e-15);
    }

    #[test]
    fn mean_pose_empty_errors() {
        assert!(matches!(
            compute_mean_pose(&[]),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn normalize_constant_sequence_is_zero() {
        let s = seq(&[[0.1, 0.2, 0.3]; 5]);
        let m = compute_mean_pose(std::slice::from_ref(&s)).unwrap();
        let n = normalize_poses(&s, &m);
        for f in n.frames() {
            assert_eq!(f.as_array(), [0.0, 0.0, 0.0]);
        }
    }

    #[test]
    fn normalize_with_zero_mean_is_identity() {
        let s = seq(&[[0.5, 0.2, -0.1], [0.0, 0.1, 0.3]]);
        let n = normalize_poses(&s, &PoseFrame::ZERO);
        assert_eq!(n, s);
    }

    #[test]
    fn normalize_subtracts_componentwise() {
        let s = seq(&[[0.5, 0.2, -0.1]]);
        let n = normalize_poses(&s, &PoseFrame::new(0.1, 0.1, 0.1));
        let f = n.frames()[0];
        assert!((f.rx - 0.4).abs() < 1e-15);
        assert!((f.ry - 0.1).abs() < 1e-15);
        assert!((f.rz + 0.2).abs() < 1e-15);
    }

    #[test]
    fn mirror_example_mae_by_hand() {
        // rx = [0.1, -0.3] mirrored along X; other channels zero.
        // MAE over all 6 entries = (0.2 + 0.6) / 6.
        let s = seq(&[[0.1, 0.0, 0.0], [-0.3, 0.0, 0.0]]);
        let m = mirror(&s, Axis::X);
        assert_eq!(m.frames()[0].rx, -0.1);
        assert_eq!(m.frames()[1].rx, 0.3);
        let mae = crate::metrics::mae(&s, &m).unwrap();
        assert!((mae - 0.8 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn mirror_zero_sequence_fixed_point() {
        let s = seq(&[[0.0, 0.0, 0.0]; 3]);
        for axis in Axis::ALL {
            assert_eq!(mirror(&s, axis), s);
        }
    }

    #[test]
    fn pose_csv_round_trip_and_gap_tolerance() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pose.csv");
        let s = seq(&[[0.1, -0.2, 0.3], [0.25, 0.0, -0.125]]);
        write_pose_csv(&path, &s).unwrap();
        let table = read_pose_csv(&path).unwrap();
        assert_eq!(table.len(), 2);
        assert_eq!(table[&0].rx, 0.1);
        assert_eq!(table[&1].rz, -0.125);

        // Gapped file: frame 1 missing.
        let gapped = dir.path().join("gapped.csv");
        std::fs::write(&gapped, "frame,rx,ry,rz\n0,0.1,0,0\n2,0.2,0,0\n").unwrap();
        let table = read_pose_csv(&gapped).unwrap();
        assert_eq!(table.len(), 2);
        assert!(!table.contains_key(&1));
    }

    #[test]
    fn pose_csv_rejects_out_of_range() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "frame,rx,ry,rz\n0,3.2,0,0\n").unwrap();
        assert!(read_pose_csv(&path).is_err());
    }

    proptest! {
        #[test]
        fn mirror_is_involution(
            frames in proptest::collection::vec(
                (-3.0f64..3.0, -3.0f64..3.0, -3.0f64..3.0), 1..40),
            axis_idx in 0usize..3,
        ) {
            let s = PoseSequence::new(
                frames.iter().map(|&(x, y, z)| PoseFrame::new(x, y, z)).collect()
            ).unwrap();
            let axis = Axis::ALL[axis_idx];
            let twice = mirror(&mirror(&s, axis), axis);
            // Negation is exact in IEEE 754, so this is bitwise equality.
            prop_assert_eq!(twice, s);
        }

        #[test]
        fn mirror_preserves_absolute_values(
            frames in proptest::collection::vec(
                (-3.0f64..3.0, -3.0f64..3.0, -3.0f64..3.0), 1..40),
            axis_idx in 0usize..3,
        ) {
            let s = PoseSequence::new(
                frames.iter().map(|&(x, y, z)| PoseFrame::new(x, y, z)).collect()
            ).unwrap();
            let m = mirror(&s, Axis::ALL[axis_idx]);
            for (a, b) in s.frames().iter().zip(m.frames()) {
                for axis in Axis::ALL {
                    prop_assert_eq!(
                        a.component(axis).abs().to_bits(),
                        b.component(axis).abs().to_bits()
                    );
                }
            }
        }

        #[test]
        fn self_normalization_centers_sequence(
            frames in proptest::collection::vec(
                (-3.0f64..3.0, -3.0f64..3.0, -3.0f64..3.0), 1..60),
        ) {
            let s = PoseSequence::new(
                frames.iter().map(|&(x, y, z)| PoseFrame::new(x, y, z)).collect()
            ).unwrap();
            let m = compute_mean_pose(std::slice::from_ref(&s)).unwrap();
            let n = normalize_poses(&s, &m);
            let centered = compute_mean_pose(&[n]).unwrap();
            for axis in Axis::ALL {
                prop_assert!(centered.component(axis).abs() < 1e-12);
            }
        }
    }
}
