//! Grasp list parsing and trajectory dumps.

use std::io::Write;
use std::path::Path;

use crate::config::ScenarioConfig;
use crate::grasp::{Frame, GraspSpec};
use crate::scene::JawProfile;
use crate::{Error, Result, Vec2};

/// Optional per-grasp settings that replace the configured ones.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GraspOverrides {
    pub max_width: Option<f64>,
    pub closing_speed: Option<f64>,
    pub lift_speed: Option<f64>,
    pub profile: Option<JawProfile>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraspEntry {
    pub id: String,
    pub center: Vec2,
    pub angle: f64,
    pub overrides: GraspOverrides,
}

impl GraspEntry {
    /// The grasp this entry describes on top of the configuration's defaults.
    pub fn spec(&self, config: &ScenarioConfig) -> GraspSpec {
        let o = &self.overrides;
        GraspSpec {
            center: self.center,
            axis_angle: self.angle,
            max_width: o.max_width.unwrap_or(config.jaw.max_width),
            closing_speed: o.closing_speed.unwrap_or(config.jaw.closing_speed),
            lift_speed: o.lift_speed.unwrap_or(config.jaw.lift_speed),
            jaw_profile: o.profile.unwrap_or(config.jaw.profile),
        }
    }

    /// Single-entry list for the grasp stored in the configuration.
    pub fn from_config(config: &ScenarioConfig, id: &str) -> Result<Self> {
        let u = config.grasp_spec()?;
        Ok(Self { id: id.to_string(), center: u.center, angle: u.axis_angle, overrides: GraspOverrides::default() })
    }
}

/// Parse a grasp list: `id,center_x,center_y,angle[,key=value...]` per line,
/// keys `max_width`, `closing_speed`, `lift_speed`, `profile`. A header row
/// starting with `id` and `#` comments are skipped.
pub fn parse_grasp_list(text: &str, source: &str) -> Result<Vec<GraspEntry>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut out: Vec<GraspEntry> = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            path: source.to_string(),
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(k + 1, |p| p.line() as usize);
        let err = |message: String| Error::Parse { path: source.to_string(), line, message };
        if k == 0 && record.get(0) == Some("id") {
            continue;
        }
        if record.len() < 4 {
            return Err(err(format!("expected at least 4 fields, got {}", record.len())));
        }
        let num = |i: usize| -> Result<f64> {
            let v: f64 = record[i].parse().map_err(|e| err(format!("field {}: {:?}: {e}", i + 1, &record[i])))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(err(format!("field {} is not finite", i + 1)))
            }
        };
        let id = record[0].to_string();
        if id.is_empty() {
            return Err(err("empty grasp id".into()));
        }
        if out.iter().any(|g| g.id == id) {
            return Err(err(format!("duplicate grasp id {id:?}")));
        }
        let mut overrides = GraspOverrides::default();
        for field in record.iter().skip(4).filter(|f| !f.is_empty()) {
            let (key, value) =
                field.split_once('=').ok_or_else(|| err(format!("expected key=value, got {field:?}")))?;
            let positive = |v: &str| -> Result<f64> {
                match v.trim().parse::<f64>() {
                    Ok(x) if x > 0.0 && x.is_finite() => Ok(x),
                    _ => Err(err(format!("{key} must be a positive number, got {v:?}"))),
                }
            };
            match key.trim() {
                "max_width" => overrides.max_width = Some(positive(value)?),
                "closing_speed" => overrides.closing_speed = Some(positive(value)?),
                "lift_speed" => overrides.lift_speed = Some(positive(value)?),
                "profile" => overrides.profile = Some(value.parse().map_err(|e: Error| err(e.to_string()))?),
                other => return Err(err(format!("unknown override {other:?}"))),
            }
        }
        out.push(GraspEntry { id, center: Vec2::new(num(1)?, num(2)?), angle: num(3)?, overrides });
    }
    Ok(out)
}

pub fn read_grasp_list(path: &Path) -> Result<Vec<GraspEntry>> {
    parse_grasp_list(&std::fs::read_to_string(path)?, &path.display().to_string())
}

/// One frame per line: time, then `x,y` for every vertex in scene order.
pub fn write_trajectory<W: Write>(mut w: W, frames: &[Frame]) -> Result<()> {
    for f in frames {
        write!(w, "{}", f.time)?;
        for p in &f.positions {
            write!(w, ",{},{}", p.x, p.y)?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Inverse of [`write_trajectory`].
pub fn parse_trajectory(text: &str) -> Result<Vec<Frame>> {
    text.lines()
        .enumerate()
        .map(|(i, line)| {
            let err = |m: String| Error::Parse { path: "trajectory".into(), line: i + 1, message: m };
            let nums: Vec<f64> =
                line.split(',').map(|s| s.parse::<f64>().map_err(|e| err(e.to_string()))).collect::<Result<_>>()?;
            if nums.len() % 2 != 1 {
                return Err(err("expected time followed by coordinate pairs".into()));
            }
            Ok(Frame { time: nums[0], positions: nums[1..].chunks(2).map(|c| Vec2::new(c[0], c[1])).collect() })
        })
        .collect()
}
