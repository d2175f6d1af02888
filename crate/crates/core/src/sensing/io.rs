//! Trajectory replay files (JSON) and frame dumps (CSV).

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use super::{ChannelFrame, HandSample, SensingError, Trajectory};

#[derive(Debug, thiserror::Error)]
pub enum ReplayError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("malformed trajectory file: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Sensing(#[from] SensingError),
    #[error("malformed frame dump at line {line}: {msg}")]
    Csv { line: usize, msg: String },
}

/// Parses a JSON array of `{"t","x","y","z"}` objects.
pub fn parse_trajectory(json: &str) -> Result<Trajectory, ReplayError> {
    let samples: Vec<HandSample> = serde_json::from_str(json)?;
    Ok(Trajectory::new(samples)?)
}

pub fn load_trajectory(path: impl AsRef<Path>) -> Result<Trajectory, ReplayError> {
    parse_trajectory(&fs::read_to_string(path)?)
}

pub fn save_trajectory(path: impl AsRef<Path>, traj: &Trajectory) -> Result<(), ReplayError> {
    fs::write(path, serde_json::to_string_pretty(traj.samples())?)?;
    Ok(())
}

pub fn write_frames_csv<W: Write>(mut w: W, frames: &[ChannelFrame]) -> io::Result<()> {
    writeln!(w, "t,a,b,c,d")?;
    for f in frames {
        writeln!(w, "{:.6},{:.6},{:.6},{:.6},{:.6}", f.t_s, f.a, f.b, f.c, f.d)?;
    }
    Ok(())
}

pub fn read_frames_csv(text: &str) -> Result<Vec<ChannelFrame>, ReplayError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == "t,a,b,c,d" => {}
        _ => return Err(ReplayError::Csv { line: 1, msg: "expected header t,a,b,c,d".into() }),
    }
    lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let vals: Vec<f64> = l
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| ReplayError::Csv { line: i + 1, msg: e.to_string() })?;
            match vals[..] {
                [t, a, b, c, d] => Ok(ChannelFrame { t_s: t, a, b, c, d }),
                _ => Err(ReplayError::Csv { line: i + 1, msg: format!("expected 5 fields, got {}", vals.len()) }),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_replay_file() {
        let traj = parse_trajectory(r#"[{"t":0,"x":1,"y":2,"z":3},{"t":0.5,"x":1.5,"y":2,"z":2.5}]"#).unwrap();
        assert_eq!(traj.samples().len(), 2);
        assert_eq!(traj.samples()[1], HandSample::new(0.5, 1.5, 2.0, 2.5));
    }

    #[test]
    fn replay_rejects_time_reversal() {
        let err = parse_trajectory(r#"[{"t":1,"x":0,"y":0,"z":3},{"t":0.5,"x":0,"y":0,"z":3}]"#).unwrap_err();
        assert!(matches!(err, ReplayError::Sensing(SensingError::NonMonotoneTime { .. })));
    }

    #[test]
    fn csv_has_six_decimals() {
        let mut out = Vec::new();
        write_frames_csv(&mut out, &[ChannelFrame { t_s: 0.0125, a: 0.1, b: 1.0 / 3.0, c: 0.0, d: 1.0 }]).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text, "t,a,b,c,d\n0.012500,0.100000,0.333333,0.000000,1.000000\n");
        let back = read_frames_csv(&text).unwrap();
        assert_eq!(back[0].b, 0.333333);
    }
}
