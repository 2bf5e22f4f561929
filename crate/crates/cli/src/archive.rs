//! Profile archives: a one-line format marker with a JSON header, comment
//! lines with provenance, then plain CSV. Floating-point columns use 17
//! significant digits so save/load round-trips are bit-exact. Files are
//! written atomically (temp file in the same directory, then rename), so a
//! truncated archive can only come from an interrupted copy and is rejected
//! whole.

use std::fmt::Write as _;
use std::path::Path;

use disloc_core::{
    CorrectorProfile, Error, FracOrder, GridFunction, LayerProfile, Result, TailModel,
    CORRECTOR_GAUGE,
};
use serde::{Deserialize, Serialize};

use crate::TOOL_VERSION;

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "#%disloc-profile";

#[derive(Debug, Clone)]
pub enum Profile {
    Layer(LayerProfile),
    Corrector(CorrectorProfile),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    kind: String,
    s: f64,
    eta: f64,
    residual_norm: f64,
    gauge: String,
    tool_version: String,
    x_min: f64,
    dx: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    solvability_defect: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    orthogonality_defect: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    u_tail: Option<TailModel>,
    #[serde(skip_serializing_if = "Option::is_none")]
    u_stitch_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    du_tail: Option<TailModel>,
    #[serde(skip_serializing_if = "Option::is_none")]
    du_stitch_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    psi_tail: Option<TailModel>,
    #[serde(skip_serializing_if = "Option::is_none")]
    psi_stitch_tol: Option<f64>,
}

/// Write `text` to `path` atomically.
pub fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let tmp = path.with_extension("part");
    std::fs::write(&tmp, text)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn save_profile(p: &Profile, path: &Path, config_hash: &str) -> Result<()> {
    let mut out = String::new();
    let header = match p {
        Profile::Layer(l) => Header {
            kind: "layer".into(),
            s: l.s.s,
            eta: l.eta,
            residual_norm: l.residual_norm,
            gauge: CORRECTOR_GAUGE.into(),
            tool_version: TOOL_VERSION.into(),
            x_min: l.u.x_min,
            dx: l.u.dx,
            gamma: Some(l.gamma),
            beta: Some(l.beta),
            solvability_defect: None,
            orthogonality_defect: None,
            u_tail: Some(l.u.tail),
            u_stitch_tol: Some(l.u.stitch_tol),
            du_tail: Some(l.du.tail),
            du_stitch_tol: Some(l.du.stitch_tol),
            psi_tail: None,
            psi_stitch_tol: None,
        },
        Profile::Corrector(c) => Header {
            kind: "corrector".into(),
            s: c.s.s,
            eta: c.eta,
            residual_norm: c.residual_norm,
            gauge: CORRECTOR_GAUGE.into(),
            tool_version: TOOL_VERSION.into(),
            x_min: c.psi.x_min,
            dx: c.psi.dx,
            gamma: None,
            beta: None,
            solvability_defect: Some(c.solvability_defect),
            orthogonality_defect: Some(c.orthogonality_defect),
            u_tail: None,
            u_stitch_tol: None,
            du_tail: None,
            du_stitch_tol: None,
            psi_tail: Some(c.psi.tail),
            psi_stitch_tol: Some(c.psi.stitch_tol),
        },
    };
    let json = serde_json::to_string(&header)
        .map_err(|e| Error::Parse(format!("header serialization: {e}")))?;
    writeln!(out, "{MAGIC} {FORMAT_VERSION} {json}").unwrap();
    writeln!(out, "# disloc {TOOL_VERSION} config sha256:{config_hash}").unwrap();
    match p {
        Profile::Layer(l) => {
            writeln!(out, "x,u,du").unwrap();
            for i in 0..l.u.n() {
                writeln!(out, "{:.16e},{:.16e},{:.16e}", l.u.x(i), l.u.values[i], l.du.values[i])
                    .unwrap();
            }
        }
        Profile::Corrector(c) => {
            writeln!(out, "x,psi").unwrap();
            for i in 0..c.psi.n() {
                writeln!(out, "{:.16e},{:.16e}", c.psi.x(i), c.psi.values[i]).unwrap();
            }
        }
    }
    write_atomic(path, &out)
}

pub fn load_profile(path: &Path) -> Result<Profile> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let first = lines
        .next()
        .ok_or_else(|| Error::Parse("empty profile file".into()))?;
    let rest = first
        .strip_prefix(MAGIC)
        .ok_or_else(|| Error::Parse(format!("not a profile archive (missing {MAGIC} marker)")))?
        .trim_start();
    let (ver_str, json) = rest
        .split_once(' ')
        .ok_or_else(|| Error::Parse("malformed profile marker line".into()))?;
    let found: u32 = ver_str
        .parse()
        .map_err(|_| Error::Parse(format!("bad format version {ver_str:?}")))?;
    if found != FORMAT_VERSION {
        return Err(Error::FormatVersion { found, supported: FORMAT_VERSION });
    }
    let header: Header = serde_json::from_str(json)
        .map_err(|e| Error::Parse(format!("profile header: {e}")))?;
    let s = FracOrder::new_model(header.s)?;

    // skip comment lines, take the column header, then the data rows
    let mut data = lines.filter(|l| !l.starts_with('#'));
    let columns = data
        .next()
        .ok_or_else(|| Error::Parse("truncated profile: no column header".into()))?;
    let parse_row = |line: &str, want: usize| -> Result<Vec<f64>> {
        let vals: std::result::Result<Vec<f64>, _> =
            line.split(',').map(str::trim).map(str::parse::<f64>).collect();
        let vals = vals.map_err(|e| Error::Parse(format!("bad profile row {line:?}: {e}")))?;
        if vals.len() != want {
            return Err(Error::Parse(format!(
                "profile row has {} columns, expected {want}",
                vals.len()
            )));
        }
        Ok(vals)
    };

    match header.kind.as_str() {
        "layer" => {
            if columns != "x,u,du" {
                return Err(Error::Parse(format!("unexpected layer columns {columns:?}")));
            }
            let mut u = Vec::new();
            let mut du = Vec::new();
            for line in data {
                let row = parse_row(line, 3)?;
                u.push(row[1]);
                du.push(row[2]);
            }
            let u_tail = header.u_tail.ok_or_else(|| Error::Parse("layer header missing u_tail".into()))?;
            let du_tail =
                header.du_tail.ok_or_else(|| Error::Parse("layer header missing du_tail".into()))?;
            let u = GridFunction::with_stitch_tol(
                header.x_min,
                header.dx,
                u,
                u_tail,
                header.u_stitch_tol.unwrap_or(1e-3),
            )?;
            let du = GridFunction::with_stitch_tol(
                header.x_min,
                header.dx,
                du,
                du_tail,
                header.du_stitch_tol.unwrap_or(1e-3),
            )?;
            Ok(Profile::Layer(LayerProfile {
                u,
                du,
                s,
                gamma: header.gamma.ok_or_else(|| Error::Parse("layer header missing gamma".into()))?,
                eta: header.eta,
                beta: header.beta.ok_or_else(|| Error::Parse("layer header missing beta".into()))?,
                residual_norm: header.residual_norm,
            }))
        }
        "corrector" => {
            if columns != "x,psi" {
                return Err(Error::Parse(format!("unexpected corrector columns {columns:?}")));
            }
            let mut psi = Vec::new();
            for line in data {
                psi.push(parse_row(line, 2)?[1]);
            }
            let tail = header
                .psi_tail
                .ok_or_else(|| Error::Parse("corrector header missing psi_tail".into()))?;
            let psi = GridFunction::with_stitch_tol(
                header.x_min,
                header.dx,
                psi,
                tail,
                header.psi_stitch_tol.unwrap_or(0.5),
            )?;
            Ok(Profile::Corrector(CorrectorProfile {
                psi,
                s,
                eta: header.eta,
                solvability_defect: header.solvability_defect.unwrap_or(0.0),
                orthogonality_defect: header.orthogonality_defect.unwrap_or(0.0),
                residual_norm: header.residual_norm,
            }))
        }
        other => Err(Error::Parse(format!("unknown profile kind {other:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use disloc_core::{solve_layer, LayerGrid, PotentialSpec};

    fn small_layer() -> LayerProfile {
        let p = PotentialSpec::builtin_cosine();
        let s = FracOrder::new_model(0.25).unwrap();
        solve_layer(&p, s, LayerGrid { x_half: 30.0, dx: 0.25 }, 1e-6).unwrap()
    }

    #[test]
    fn layer_round_trip_is_bit_exact() {
        let layer = small_layer();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("layer.profile");
        save_profile(&Profile::Layer(layer.clone()), &path, "test").unwrap();
        let Profile::Layer(back) = load_profile(&path).unwrap() else {
            panic!("wrong kind");
        };
        assert_eq!(layer.u.values, back.u.values);
        assert_eq!(layer.du.values, back.du.values);
        assert_eq!(layer.u.tail, back.u.tail);
        assert!(layer.gamma == back.gamma && layer.eta == back.eta && layer.beta == back.beta);
        assert!(layer.residual_norm == back.residual_norm);
    }

    #[test]
    fn truncated_file_rejected_whole() {
        let layer = small_layer();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("layer.profile");
        save_profile(&Profile::Layer(layer), &path, "test").unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let cut = &text[..text.len() / 2];
        let cut = &cut[..cut.rfind('\n').unwrap() + 1];
        // drop a row mid-file by truncating, then also corrupt the last kept row
        let mut broken = cut.to_string();
        broken.push_str("1.0,not_a_number,3.0\n");
        std::fs::write(&path, broken).unwrap();
        assert!(matches!(load_profile(&path), Err(Error::Parse(_))));
    }

    #[test]
    fn future_format_version_rejected() {
        let layer = small_layer();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("layer.profile");
        save_profile(&Profile::Layer(layer), &path, "test").unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let bumped = text.replacen("#%disloc-profile 1 ", "#%disloc-profile 2 ", 1);
        std::fs::write(&path, bumped).unwrap();
        match load_profile(&path) {
            Err(Error::FormatVersion { found: 2, supported: 1 }) => {}
            other => panic!("expected version error, got {other:?}"),
        }
    }
}
