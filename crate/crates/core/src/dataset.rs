//! Corpus manifests, video-level splitting, utterance segmentation, and
//! the synthetic corpus generator used for desk-scale experiments.
//!
//! Splitting happens at the video level (no video spans splits). Each
//! video is cut into non-overlapping 250-frame (10-second) windows from
//! frame 0; the trailing remainder is discarded, and so is any window
//! with a missing pose frame.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{Waveform, HOP_SIZE, SAMPLE_RATE};
use crate::motion::{PoseFrame, PoseSequence, PoseTable, FPS, UTTERANCE_FRAMES};
use crate::seeds;

pub const DEFAULT_SPLIT_FRACTIONS: (f64, f64, f64) = (0.75, 0.125, 0.125);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Split::Train => write!(f, "train"),
            Split::Val => write!(f, "val"),
            Split::Test => write!(f, "test"),
        }
    }
}

/// One source video with its on-disk artifacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoEntry {
    pub video_id: String,
    pub audio: PathBuf,
    pub pose: PathBuf,
    pub duration_s: f64,
    pub split: Split,
}

/// A contiguous 10-second window of one video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Utterance {
    pub utterance_id: String,
    pub video_id: String,
    pub start_frame: u64,
}

/// The corpus index produced by segmentation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub videos: Vec<VideoEntry>,
    pub utterances: Vec<Utterance>,
}

impl Manifest {
    pub fn videos_in(&self, split: Split) -> impl Iterator<Item = &VideoEntry> {
        self.videos.iter().filter(move |v| v.split == split)
    }

    pub fn utterances_in(&self, split: Split) -> Vec<&Utterance> {
        let split_ids: std::collections::BTreeSet<&str> = self
            .videos_in(split)
            .map(|v| v.video_id.as_str())
            .collect();
        self.utterances
            .iter()
            .filter(|u| split_ids.contains(u.video_id.as_str()))
            .collect()
    }

    pub fn video(&self, video_id: &str) -> Option<&VideoEntry> {
        self.videos.iter().find(|v| v.video_id == video_id)
    }
}

/// Unsplit corpus description written by the synthetic generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub version: String,
    pub videos: Vec<CorpusVideo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusVideo {
    pub video_id: String,
    pub audio: PathBuf,
    pub pose: PathBuf,
    pub duration_s: f64,
}

/// Assign each video to train/val/test: seeded shuffle, then contiguous
/// blocks with counts rounded to nearest from the fractions.
pub fn split_videos(
    videos: &[CorpusVideo],
    fractions: (f64, f64, f64),
    seed: u64,
) -> Result<Vec<VideoEntry>> {
    if videos.len() < 3 {
        return Err(Error::InvalidValue(format!(
            "need at least 3 videos to split, got {}",
            videos.len()
        )));
    }
    let (f_train, f_val, f_test) = fractions;
    let total = f_train + f_val + f_test;
    if (total - 1.0).abs() > 1e-9 || f_train <= 0.0 || f_val < 0.0 || f_test < 0.0 {
        return Err(Error::InvalidValue(format!(
            "split fractions must be nonnegative and sum to 1, got {fractions:?}"
        )));
    }
    let n = videos.len();
    let n_train = (f_train * n as f64).round() as usize;
    let n_val = (f_val * n as f64).round() as usize;
    let (n_train, n_val) = if n_train + n_val > n {
        (n_train.min(n), n.saturating_sub(n_train).min(n_val))
    } else {
        (n_train, n_val)
    };

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = seeds::rng(seeds::derive(seed, "video-split"));
    order.shuffle(&mut rng);

    let mut entries: Vec<VideoEntry> = Vec::with_capacity(n);
    for (pos, &idx) in order.iter().enumerate() {
        let split = if pos < n_train {
            Split::Train
        } else if pos < n_train + n_val {
            Split::Val
        } else {
            Split::Test
        };
        let v = &videos[idx];
        entries.push(VideoEntry {
            video_id: v.video_id.clone(),
            audio: v.audio.clone(),
            pose: v.pose.clone(),
            duration_s: v.duration_s,
            split,
        });
    }
    entries.sort_by(|a, b| a.video_id.cmp(&b.video_id));
    Ok(entries)
}

/// Start frames of the retained 250-frame windows of one pose table:
/// non-overlapping from frame 0, trailing remainder discarded, windows
/// with any missing frame discarded.
pub fn segment_pose_table(table: &PoseTable) -> Vec<u64> {
    let Some(&last) = table.keys().next_back() else {
        return Vec::new();
    };
    let total_frames = last + 1;
    let n_windows = total_frames / UTTERANCE_FRAMES as u64;
    (0..n_windows)
        .map(|w| w * UTTERANCE_FRAMES as u64)
        .filter(|&start| {
            (start..start + UTTERANCE_FRAMES as u64).all(|f| table.contains_key(&f))
        })
        .collect()
}

/// Segment one video into utterances (reads its pose file).
pub fn segment_utterances(video: &VideoEntry) -> Result<Vec<Utterance>> {
    let table = crate::motion::read_pose_csv(&video.pose)?;
    Ok(segment_pose_table(&table)
        .into_iter()
        .enumerate()
        .map(|(i, start_frame)| Utterance {
            utterance_id: format!("{}_u{:03}", video.video_id, i),
            video_id: video.video_id.clone(),
            start_frame,
        })
        .collect())
}

/// Extract one utterance's pose window from a table.
pub fn utterance_poses(table: &PoseTable, start_frame: u64) -> Result<PoseSequence> {
    let frames: Vec<PoseFrame> = (start_frame..start_frame + UTTERANCE_FRAMES as u64)
        .map(|f| {
            table.get(&f).copied().ok_or_else(|| {
                Error::InvalidValue(format!("missing pose frame {f} in utterance window"))
            })
        })
        .collect::<Result<_>>()?;
    PoseSequence::new(frames)
}

/// Extract one utterance's audio span (40 ms-aligned with its frames).
pub fn utterance_waveform(w: &Waveform, start_frame: u64) -> Result<Waveform> {
    let start = start_frame as usize * HOP_SIZE;
    let end = start + UTTERANCE_FRAMES * HOP_SIZE;
    if end > w.samples().len() {
        return Err(Error::InvalidValue(format!(
            "audio too short for utterance at frame {start_frame}"
        )));
    }
    Waveform::new(w.samples()[start..end].to_vec(), w.sample_rate())
}

// ---------------------------------------------------------------------------
// Synthetic corpus
// ---------------------------------------------------------------------------

/// Generate a synthetic corpus on disk: per video a 16 kHz WAV (band-
/// limited noise plus amplitude-modulated tones under a slow envelope)
/// and a pose CSV whose sinusoidal motion amplitude follows the same
/// envelope, so speech and motion are statistically linked. Byte-identical
/// for a given seed.
pub fn generate_synthetic_corpus(out_dir: &Path, n_videos: usize, seed: u64) -> Result<Corpus> {
    if n_videos == 0 {
        return Err(Error::InvalidValue("n_videos must be at least 1".into()));
    }
    let audio_dir = out_dir.join("audio");
    let pose_dir = out_dir.join("poses");
    std::fs::create_dir_all(&audio_dir).map_err(|e| Error::io(audio_dir.display().to_string(), e))?;
    std::fs::create_dir_all(&pose_dir).map_err(|e| Error::io(pose_dir.display().to_string(), e))?;

    let mut videos = Vec::with_capacity(n_videos);
    for v in 0..n_videos {
        let mut rng = seeds::rng(seeds::derive_indexed(seed, "synth-video", v as u64));
        let video_id = format!("video_{v:03}");

        // 3 to 5 full utterances plus a partial remainder window.
        let n_windows = rng.random_range(3..=5usize);
        let remainder = rng.random_range(0..UTTERANCE_FRAMES);
        let total_frames = n_windows * UTTERANCE_FRAMES + remainder;
        let n_samples = total_frames * HOP_SIZE;

        // Slow global envelope shared by audio and motion.
        let env_rate = rng.random_range(0.15..0.5);
        let env_phase = rng.random_range(0.0..std::f64::consts::TAU);
        let envelope =
            |t: f64| 0.55 + 0.45 * (std::f64::consts::TAU * env_rate * t + env_phase).sin();

        // Band-limited noise: random-phase sinusoids spread over speech
        // frequencies.
        let noise_parts: Vec<(f64, f64, f64)> = (0..16)
            .map(|_| {
                (
                    rng.random_range(80.0..3800.0f64),
                    rng.random_range(0.0..std::f64::consts::TAU),
                    rng.random_range(0.01..0.05),
                )
            })
            .collect();
        // Amplitude-modulated tones.
        let tones: Vec<(f64, f64, f64, f64)> = (0..2)
            .map(|_| {
                (
                    rng.random_range(200.0..1200.0f64),
                    rng.random_range(0.0..std::f64::consts::TAU),
                    rng.random_range(0.2..0.8f64),
                    rng.random_range(0.0..std::f64::consts::TAU),
                )
            })
            .collect();

        let samples: Vec<f64> = (0..n_samples)
            .map(|i| {
                let t = i as f64 / SAMPLE_RATE as f64;
                let mut x = 0.0;
                for &(f, phase, amp) in &noise_parts {
                    x += amp * (std::f64::consts::TAU * f * t + phase).sin();
                }
                for &(f, phase, mod_rate, mod_phase) in &tones {
                    let m = 0.5
                        * (1.0 + (std::f64::consts::TAU * mod_rate * t + mod_phase).sin());
                    x += 0.15 * m * (std::f64::consts::TAU * f * t + phase).sin();
                }
                (x * envelope(t)).clamp(-0.95, 0.95)
            })
            .collect();

        // Poses: per axis, a sum of low-frequency sinusoids scaled by the
        // envelope at the frame time. Amplitudes cap well below pi.
        let pose_parts: Vec<Vec<(f64, f64, f64)>> = (0..3)
            .map(|_| {
                (0..3)
                    .map(|_| {
                        (
                            rng.random_range(0.1..1.2f64),
                            rng.random_range(0.0..std::f64::consts::TAU),
                            rng.random_range(0.05..0.15),
                        )
                    })
                    .collect()
            })
            .collect();
        let frames: Vec<PoseFrame> = (0..total_frames)
            .map(|f| {
                let t = f as f64 / FPS as f64;
                let e = envelope(t);
                let mut vals = [0.0f64; 3];
                for (axis, parts) in pose_parts.iter().enumerate() {
                    for &(rate, phase, amp) in parts {
                        vals[axis] +=
                            e * amp * (std::f64::consts::TAU * rate * t + phase).sin();
                    }
                }
                PoseFrame::new(vals[0], vals[1], vals[2])
            })
            .collect();

        let audio_path = audio_dir.join(format!("{video_id}.wav"));
        let pose_path = pose_dir.join(format!("{video_id}.csv"));
        crate::features::write_wav(&audio_path, &Waveform::new(samples, SAMPLE_RATE)?)?;
        crate::motion::write_pose_csv(&pose_path, &PoseSequence::new(frames)?)?;

        videos.push(CorpusVideo {
            video_id,
            audio: audio_path,
            pose: pose_path,
            duration_s: total_frames as f64 / FPS as f64,
        });
    }
    let corpus = Corpus {
        version: "v1".to_string(),
        videos,
    };
    write_corpus(&out_dir.join("corpus.json"), &corpus)?;
    Ok(corpus)
}

pub fn write_corpus(path: &Path, corpus: &Corpus) -> Result<()> {
    let display = path.display().to_string();
    let json = serde_json::to_string_pretty(corpus).map_err(|e| Error::json(&display, e))?;
    std::fs::write(path, json).map_err(|e| Error::io(&display, e))
}

pub fn read_corpus(path: &Path) -> Result<Corpus> {
    let display = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(&display, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(&display, e))
}

pub fn write_manifest(path: &Path, manifest: &Manifest) -> Result<()> {
    let display = path.display().to_string();
    let json = serde_json::to_string_pretty(manifest).map_err(|e| Error::json(&display, e))?;
    std::fs::write(path, json).map_err(|e| Error::io(&display, e))
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let display = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(&display, e))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| Error::json(&display, e))?;
    for v in &manifest.videos {
        for p in [&v.audio, &v.pose] {
            if !p.exists() {
                return Err(Error::InvalidValue(format!(
                    "manifest {display} references missing file {}",
                    p.display()
                )));
            }
        }
    }
    let mut seen = std::collections::BTreeSet::new();
    for u in &manifest.utterances {
        if !seen.insert(&u.utterance_id) {
            return Err(Error::InvalidValue(format!(
                "duplicate utterance id {}",
                u.utterance_id
            )));
        }
    }
    Ok(manifest)
}

/// Build a manifest from a corpus: split videos, then segment each one.
pub fn build_manifest(
    corpus: &Corpus,
    fractions: (f64, f64, f64),
    seed: u64,
) -> Result<Manifest> {
    let videos = split_videos(&corpus.videos, fractions, seed)?;
    let mut utterances = Vec::new();
    for video in &videos {
        utterances.extend(segment_utterances(video)?);
    }
    Ok(Manifest {
        version: "v1".to_string(),
        videos,
        utterances,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fake_videos(n: usize) -> Vec<CorpusVideo> {
        (0..n)
            .map(|i| CorpusVideo {
                video_id: format!("video_{i:03}"),
                audio: PathBuf::from(format!("a{i}.wav")),
                pose: PathBuf::from(format!("p{i}.csv")),
                duration_s: 40.0,
            })
            .collect()
    }

    fn count(entries: &[VideoEntry], split: Split) -> usize {
        entries.iter().filter(|e| e.split == split).count()
    }

    #[test]
    fn split_24_videos_exact() {
        let entries = split_videos(&fake_videos(24), DEFAULT_SPLIT_FRACTIONS, 1).unwrap();
        assert_eq!(count(&entries, Split::Train), 18);
        assert_eq!(count(&entries, Split::Val), 3);
        assert_eq!(count(&entries, Split::Test), 3);
    }

    #[test]
    fn split_8_videos_rounded() {
        let entries = split_videos(&fake_videos(8), DEFAULT_SPLIT_FRACTIONS, 1).unwrap();
        assert_eq!(count(&entries, Split::Train), 6);
        assert_eq!(count(&entries, Split::Val), 1);
        assert_eq!(count(&entries, Split::Test), 1);
    }

    #[test]
    fn split_too_few_videos() {
        assert!(split_videos(&fake_videos(2), DEFAULT_SPLIT_FRACTIONS, 1).is_err());
    }

    #[test]
    fn split_is_seeded_partition() {
        let videos = fake_videos(16);
        let a = split_videos(&videos, DEFAULT_SPLIT_FRACTIONS, 9).unwrap();
        let b = split_videos(&videos, DEFAULT_SPLIT_FRACTIONS, 9).unwrap();
        assert_eq!(a, b);
        let c = split_videos(&videos, DEFAULT_SPLIT_FRACTIONS, 10).unwrap();
        assert_ne!(a, c);
        // Partition: every video appears exactly once.
        let mut ids: Vec<&str> = a.iter().map(|e| e.video_id.as_str()).collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), 16);
    }

    fn table_with_frames(frames: impl Iterator<Item = u64>) -> PoseTable {
        frames.map(|f| (f, PoseFrame::ZERO)).collect()
    }

    #[test]
    fn segmentation_full_windows() {
        // 95 s = 2375 frames: 9 full windows, remainder discarded.
        let table = table_with_frames(0..2375);
        assert_eq!(segment_pose_table(&table).len(), 9);
    }

    #[test]
    fn segmentation_too_short() {
        // 9.9 s = 247 frames: no full window.
        let table = table_with_frames(0..247);
        assert!(segment_pose_table(&table).is_empty());
    }

    #[test]
    fn segmentation_skips_windows_with_missing_frames() {
        // 30 s = 750 frames with frame 300 (t = 12 s) missing: windows 0
        // and 2 survive.
        let table = table_with_frames((0..750).filter(|&f| f != 300));
        assert_eq!(segment_pose_table(&table), vec![0, 500]);
    }

    #[test]
    fn synthetic_corpus_is_deterministic_and_valid() {
        let dir = tempfile::tempdir().unwrap();
        let out_a = dir.path().join("a");
        let out_b = dir.path().join("b");
        let corpus_a = generate_synthetic_corpus(&out_a, 3, 42).unwrap();
        let corpus_b = generate_synthetic_corpus(&out_b, 3, 42).unwrap();
        assert_eq!(corpus_a.videos.len(), 3);

        for (va, vb) in corpus_a.videos.iter().zip(&corpus_b.videos) {
            assert_eq!(
                std::fs::read(&va.audio).unwrap(),
                std::fs::read(&vb.audio).unwrap()
            );
            assert_eq!(
                std::fs::read(&va.pose).unwrap(),
                std::fs::read(&vb.pose).unwrap()
            );
        }

        // Poses in range, frame counts matched to audio.
        for v in &corpus_a.videos {
            let table = crate::motion::read_pose_csv(&v.pose).unwrap();
            for pose in table.values() {
                for axis in crate::motion::Axis::ALL {
                    assert!(pose.component(axis).abs() < std::f64::consts::PI);
                }
            }
            let w = crate::features::read_wav(&v.audio).unwrap();
            let mel = crate::features::mel_spectrogram(&w).unwrap();
            assert_eq!(mel.len() as u64, *table.keys().next_back().unwrap() + 1);
        }
    }

    #[test]
    fn manifest_round_trip_and_split_queries() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = generate_synthetic_corpus(dir.path(), 4, 7).unwrap();
        let manifest = build_manifest(&corpus, (0.5, 0.25, 0.25), 7).unwrap();
        assert!(!manifest.utterances.is_empty());

        // Every utterance is 250 frames of available poses.
        for u in &manifest.utterances {
            let video = manifest.video(&u.video_id).unwrap();
            let table = crate::motion::read_pose_csv(&video.pose).unwrap();
            let poses = utterance_poses(&table, u.start_frame).unwrap();
            assert_eq!(poses.len(), UTTERANCE_FRAMES);
        }

        let path = dir.path().join("manifest.json");
        write_manifest(&path, &manifest).unwrap();
        let back = read_manifest(&path).unwrap();
        assert_eq!(manifest, back);

        let n_train = manifest.utterances_in(Split::Train).len();
        let n_val = manifest.utterances_in(Split::Val).len();
        let n_test = manifest.utterances_in(Split::Test).len();
        assert_eq!(n_train + n_val + n_test, manifest.utterances.len());
    }
}
