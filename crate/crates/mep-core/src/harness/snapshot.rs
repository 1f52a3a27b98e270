//! Versioned decimal-text snapshots of solver states. Seventeen
//! significant digits make the text round-trip bit-exact for finite
//! doubles, so a resumed run continues from precisely the stored state.

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::eulerian::State;
use crate::lagrangian::FlowState;
use crate::spectral::{Grid, RealField};

pub const SNAPSHOT_VERSION: &str = "mep-snapshot v1";

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("unsupported snapshot header `{found}` (expected `{SNAPSHOT_VERSION}`)")]
    VersionMismatch { found: String },
    #[error("line {line}: {detail}")]
    Format { line: usize, detail: String },
    #[error("snapshot holds a {found} state, expected {expected}")]
    KindMismatch {
        expected: &'static str,
        found: &'static str,
    },
    #[error("snapshot grid {found_dim}d/{found_n} does not match configured {want_dim}d/{want_n}")]
    GridMismatch {
        found_dim: usize,
        found_n: usize,
        want_dim: usize,
        want_n: usize,
    },
    #[error("snapshot field data invalid: {0}")]
    BadField(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnapshotKind {
    Eulerian,
    Lagrangian,
}

impl SnapshotKind {
    fn name(self) -> &'static str {
        match self {
            SnapshotKind::Eulerian => "eulerian",
            SnapshotKind::Lagrangian => "lagrangian",
        }
    }
}

/// Parsed snapshot: named scalar field blocks over one grid.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub kind: SnapshotKind,
    pub dimension: usize,
    pub grid_n: usize,
    pub t: f64,
    pub fields: Vec<(String, Vec<f64>)>,
}

impl Snapshot {
    pub fn from_state(s: &State) -> Self {
        let mut fields = vec![("n".to_string(), s.n.data().to_vec())];
        for c in 0..s.v.components() {
            fields.push((format!("v{c}"), s.v.component(c).to_vec()));
        }
        Snapshot {
            kind: SnapshotKind::Eulerian,
            dimension: s.grid().dim(),
            grid_n: s.grid().n(),
            t: s.t,
            fields,
        }
    }

    pub fn from_flow(f: &FlowState) -> Self {
        Snapshot {
            kind: SnapshotKind::Lagrangian,
            dimension: 1,
            grid_n: f.p.grid().n(),
            t: f.t,
            fields: vec![
                ("p".to_string(), f.p.data().to_vec()),
                ("zeta".to_string(), f.zeta.data().to_vec()),
                ("eta".to_string(), f.eta.data().to_vec()),
            ],
        }
    }

    fn check_grid(&self, grid: Grid) -> Result<(), SnapshotError> {
        if grid.dim() != self.dimension || grid.n() != self.grid_n {
            return Err(SnapshotError::GridMismatch {
                found_dim: self.dimension,
                found_n: self.grid_n,
                want_dim: grid.dim(),
                want_n: grid.n(),
            });
        }
        Ok(())
    }

    fn take(&self, name: &str, grid: Grid) -> Result<RealField, SnapshotError> {
        let (_, data) = self
            .fields
            .iter()
            .find(|(k, _)| k == name)
            .ok_or_else(|| SnapshotError::BadField(format!("missing field `{name}`")))?;
        RealField::new(grid, 1, data.clone())
            .map_err(|e| SnapshotError::BadField(format!("field `{name}`: {e}")))
    }

    pub fn to_state(&self, grid: Grid) -> Result<State, SnapshotError> {
        if self.kind != SnapshotKind::Eulerian {
            return Err(SnapshotError::KindMismatch {
                expected: "eulerian",
                found: self.kind.name(),
            });
        }
        self.check_grid(grid)?;
        let n = self.take("n", grid)?;
        let mut v = RealField::zeros(grid, grid.dim());
        for c in 0..grid.dim() {
            let comp = self.take(&format!("v{c}"), grid)?;
            v.component_mut(c).copy_from_slice(comp.data());
        }
        State::new(self.t, n, v).map_err(|e| SnapshotError::BadField(e.to_string()))
    }

    pub fn to_flow(&self, grid: Grid) -> Result<FlowState, SnapshotError> {
        if self.kind != SnapshotKind::Lagrangian {
            return Err(SnapshotError::KindMismatch {
                expected: "lagrangian",
                found: self.kind.name(),
            });
        }
        self.check_grid(grid)?;
        FlowState::new(
            self.t,
            self.take("p", grid)?,
            self.take("zeta", grid)?,
            self.take("eta", grid)?,
        )
        .map_err(|e| SnapshotError::BadField(e.to_string()))
    }

    pub fn render(&self) -> String {
        let samples = self.fields.first().map_or(0, |(_, d)| d.len());
        let mut out = String::with_capacity(32 + self.fields.len() * samples * 26);
        out.push_str(SNAPSHOT_VERSION);
        out.push('\n');
        out.push_str(&format!("kind {}\n", self.kind.name()));
        out.push_str(&format!("dimension {}\n", self.dimension));
        out.push_str(&format!("grid.n {}\n", self.grid_n));
        out.push_str(&format!("t {:.16e}\n", self.t));
        for (name, data) in &self.fields {
            out.push_str(&format!("field {name} {}\n", data.len()));
            for x in data {
                out.push_str(&format!("{x:.16e}\n"));
            }
        }
        out.push_str("end\n");
        out
    }

    pub fn parse(text: &str) -> Result<Self, SnapshotError> {
        let mut lines = text.lines().enumerate();
        let fmt = |line: usize, detail: String| SnapshotError::Format { line, detail };
        let mut next = |expect: &str| -> Result<(usize, String), SnapshotError> {
            lines
                .next()
                .map(|(i, l)| (i + 1, l.to_string()))
                .ok_or_else(|| fmt(0, format!("unexpected end of file, expected {expect}")))
        };

        let (line, header) = next("version header")?;
        if header.trim() != SNAPSHOT_VERSION {
            let _ = line;
            return Err(SnapshotError::VersionMismatch { found: header });
        }
        let mut keyed = |key: &str| -> Result<(usize, String), SnapshotError> {
            let (line, l) = next(key)?;
            match l.split_once(' ') {
                Some((k, v)) if k == key => Ok((line, v.trim().to_string())),
                _ => Err(fmt(line, format!("expected `{key} <value>`, got `{l}`"))),
            }
        };
        let (line, kind) = keyed("kind")?;
        let kind = match kind.as_str() {
            "eulerian" => SnapshotKind::Eulerian,
            "lagrangian" => SnapshotKind::Lagrangian,
            other => return Err(fmt(line, format!("unknown kind `{other}`"))),
        };
        let (line, dim) = keyed("dimension")?;
        let dimension: usize = dim
            .parse()
            .map_err(|_| fmt(line, format!("bad dimension `{dim}`")))?;
        let (line, n) = keyed("grid.n")?;
        let grid_n: usize = n
            .parse()
            .map_err(|_| fmt(line, format!("bad grid.n `{n}`")))?;
        let (line, t) = keyed("t")?;
        let t: f64 = t.parse().map_err(|_| fmt(line, format!("bad t `{t}`")))?;
        if !t.is_finite() {
            return Err(fmt(line, "t must be finite".to_string()));
        }

        let mut fields = Vec::new();
        loop {
            let (line, l) = next("field header or end")?;
            let l = l.trim();
            if l == "end" {
                break;
            }
            let parts: Vec<&str> = l.split_whitespace().collect();
            if parts.len() != 3 || parts[0] != "field" {
                return Err(fmt(line, format!("expected `field <name> <count>`, got `{l}`")));
            }
            let name = parts[1].to_string();
            let count: usize = parts[2]
                .parse()
                .map_err(|_| fmt(line, format!("bad sample count `{}`", parts[2])))?;
            let mut data = Vec::with_capacity(count);
            for _ in 0..count {
                let (line, l) = next("field sample")?;
                let x: f64 = l
                    .trim()
                    .parse()
                    .map_err(|_| fmt(line, format!("bad sample `{l}`")))?;
                if !x.is_finite() {
                    return Err(fmt(line, "samples must be finite".to_string()));
                }
                data.push(x);
            }
            fields.push((name, data));
        }
        if fields.is_empty() {
            return Err(SnapshotError::BadField("no field blocks".to_string()));
        }
        Ok(Snapshot {
            kind,
            dimension,
            grid_n,
            t,
            fields,
        })
    }

    pub fn write_to(&self, path: &Path) -> Result<(), SnapshotError> {
        std::fs::write(path, self.render()).map_err(|source| SnapshotError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn read_from(path: &Path) -> Result<Self, SnapshotError> {
        let text = std::fs::read_to_string(path).map_err(|source| SnapshotError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::PresetName;
    use crate::harness::preset::initial_state;

    #[test]
    fn state_round_trips_bit_exactly() {
        for dim in [1usize, 2] {
            let grid = Grid::new(dim, 32).unwrap();
            let s = initial_state(grid, PresetName::Gaussian, 0.3, 0.1).unwrap();
            let snap = Snapshot::parse(&Snapshot::from_state(&s).render()).unwrap();
            let back = snap.to_state(grid).unwrap();
            assert_eq!(back.t, s.t);
            assert!(back.n.max_diff(&s.n) == 0.0, "dim {dim}: density changed");
            assert!(back.v.max_diff(&s.v) == 0.0, "dim {dim}: velocity changed");
        }
    }

    #[test]
    fn flow_round_trips_bit_exactly() {
        let grid = Grid::new(1, 64).unwrap();
        let s = initial_state(grid, PresetName::Analytic, 0.2, 0.1).unwrap();
        let mut f = FlowState::from_eulerian(&s).unwrap();
        f.t = 0.125;
        let snap = Snapshot::parse(&Snapshot::from_flow(&f).render()).unwrap();
        let back = snap.to_flow(grid).unwrap();
        assert_eq!(back.t, 0.125);
        assert!(back.zeta.max_diff(&f.zeta) == 0.0);
        assert!(back.eta.max_diff(&f.eta) == 0.0);
    }

    #[test]
    fn mismatches_are_rejected() {
        let grid = Grid::new(1, 32).unwrap();
        let s = initial_state(grid, PresetName::Analytic, 0.2, 0.1).unwrap();
        let snap = Snapshot::from_state(&s);

        let other = Grid::new(1, 64).unwrap();
        assert!(matches!(
            snap.to_state(other),
            Err(SnapshotError::GridMismatch { .. })
        ));
        assert!(matches!(
            snap.to_flow(grid),
            Err(SnapshotError::KindMismatch { .. })
        ));

        let mut text = snap.render();
        text.replace_range(..text.find('\n').unwrap(), "mep-snapshot v9");
        assert!(matches!(
            Snapshot::parse(&text),
            Err(SnapshotError::VersionMismatch { .. })
        ));
    }

    #[test]
    fn truncated_and_corrupt_files_are_rejected() {
        let grid = Grid::new(1, 32).unwrap();
        let s = initial_state(grid, PresetName::Analytic, 0.2, 0.1).unwrap();
        let text = Snapshot::from_state(&s).render();

        let cut = &text[..text.len() / 2];
        assert!(matches!(
            Snapshot::parse(cut),
            Err(SnapshotError::Format { .. })
        ));

        let poisoned = text.replacen("e-", "x-", 1);
        assert!(Snapshot::parse(&poisoned).is_err());
    }
}
