//! Grid dumps: a text header `<stem>.hdr` next to a raw payload
//! `<stem>.bin` of little-endian f64 in row-major order.
//!
//! ```text
//! format ovalwig-grid-dump 1
//! kind wigner
//! dtype f64le
//! order row-major
//! shape 44 51 48 48
//! axis y <first> <step>
//! axis x <first> <step>
//! axis p_x <first> <step>
//! axis p_y <first> <step>
//! producer ovalwig 0.1.0
//! meta k 9.16e0
//! ```
//!
//! Axes are listed slowest first. Reals are written in shortest
//! round-trip form, so headers read back bit-exactly.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ovalwig_core::geometry::{Grid2D, OvalShape};
use ovalwig_core::helmholtz::EigenMode;
use ovalwig_core::wigner::{MomentumGrid, WignerField, WignerSlice};

use crate::error::{Error, Result};

pub const FORMAT: &str = "ovalwig-grid-dump 1";
pub const DTYPE: &str = "f64le";

#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub name: String,
    pub first: f64,
    pub step: f64,
}

impl Axis {
    pub fn new(name: &str, first: f64, step: f64) -> Self {
        Self { name: name.into(), first, step }
    }

    pub fn last(&self, n: usize) -> f64 {
        self.first + (n.max(1) - 1) as f64 * self.step
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridDump {
    pub kind: String,
    pub dtype: String,
    pub shape: Vec<usize>,
    pub axes: Vec<Axis>,
    pub producer: String,
    pub meta: BTreeMap<String, String>,
    pub values: Vec<f64>,
}

pub fn producer() -> String {
    format!("ovalwig {}", env!("CARGO_PKG_VERSION"))
}

/// `path` with any `.hdr`/`.bin` extension removed.
pub fn stem(path: &Path) -> PathBuf {
    match path.extension().and_then(|e| e.to_str()) {
        Some("hdr" | "bin") => path.with_extension(""),
        _ => path.to_path_buf(),
    }
}

fn with_ext(stem: &Path, ext: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

impl GridDump {
    pub fn new(kind: &str, shape: Vec<usize>, axes: Vec<Axis>, values: Vec<f64>) -> Self {
        Self {
            kind: kind.into(),
            dtype: DTYPE.into(),
            shape,
            axes,
            producer: producer(),
            meta: BTreeMap::new(),
            values,
        }
    }

    pub fn with_meta(mut self, key: &str, value: f64) -> Self {
        self.meta.insert(key.into(), format!("{value:e}"));
        self
    }

    pub fn meta_f64(&self, key: &str) -> Result<f64> {
        let raw = self.meta.get(key).ok_or_else(|| self.bad(format!("missing meta key {key}")))?;
        raw.parse().map_err(|_| self.bad(format!("meta {key} = {raw:?} is not a number")))
    }

    fn bad(&self, message: String) -> Error {
        Error::Header { path: PathBuf::from(format!("<{} dump>", self.kind)), message }
    }

    fn header(&self) -> String {
        let mut h = String::new();
        writeln!(h, "format {FORMAT}").unwrap();
        writeln!(h, "kind {}", self.kind).unwrap();
        writeln!(h, "dtype {}", self.dtype).unwrap();
        writeln!(h, "order row-major").unwrap();
        let shape: Vec<String> = self.shape.iter().map(usize::to_string).collect();
        writeln!(h, "shape {}", shape.join(" ")).unwrap();
        for a in &self.axes {
            writeln!(h, "axis {} {:e} {:e}", a.name, a.first, a.step).unwrap();
        }
        writeln!(h, "producer {}", self.producer).unwrap();
        for (k, v) in &self.meta {
            writeln!(h, "meta {k} {v}").unwrap();
        }
        h
    }

    fn expected_len(&self) -> usize {
        self.shape.iter().product()
    }
}

pub fn write_dump(path: &Path, dump: &GridDump) -> Result<()> {
    let stem = stem(path);
    if dump.values.len() != dump.expected_len() {
        return Err(Error::Length {
            path: with_ext(&stem, "bin"),
            expected: 8 * dump.expected_len() as u64,
            actual: 8 * dump.values.len() as u64,
        });
    }
    let mut bytes = Vec::with_capacity(8 * dump.values.len());
    for v in &dump.values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    let hdr = with_ext(&stem, "hdr");
    let bin = with_ext(&stem, "bin");
    std::fs::write(&hdr, dump.header()).map_err(Error::io(&hdr))?;
    std::fs::write(&bin, bytes).map_err(Error::io(&bin))?;
    Ok(())
}

pub fn read_dump(path: &Path) -> Result<GridDump> {
    let stem = stem(path);
    let hdr = with_ext(&stem, "hdr");
    let text = std::fs::read_to_string(&hdr).map_err(Error::io(&hdr))?;
    let bad = |message: String| Error::Header { path: hdr.clone(), message };
    let mut dump = GridDump::new("", Vec::new(), Vec::new(), Vec::new());
    dump.dtype.clear();
    dump.producer.clear();
    let mut format_seen = false;
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (key, rest) = line.split_once(' ').unwrap_or((line, ""));
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("line {}: bad number {s:?}", n + 1)));
        match key {
            "format" => {
                if rest != FORMAT {
                    return Err(bad(format!("unsupported format {rest:?}")));
                }
                format_seen = true;
            }
            "kind" => dump.kind = rest.into(),
            "dtype" => dump.dtype = rest.into(),
            "order" if rest == "row-major" => {}
            "shape" => {
                dump.shape = rest
                    .split_whitespace()
                    .map(|s| s.parse().map_err(|_| bad(format!("line {}: bad extent {s:?}", n + 1))))
                    .collect::<Result<_>>()?
            }
            "axis" => {
                let parts: Vec<&str> = rest.split_whitespace().collect();
                if parts.len() != 3 {
                    return Err(bad(format!("line {}: axis needs name, first, step", n + 1)));
                }
                dump.axes.push(Axis { name: parts[0].into(), first: num(parts[1])?, step: num(parts[2])? });
            }
            "producer" => dump.producer = rest.into(),
            "meta" => {
                let (k, v) = rest.split_once(' ').ok_or_else(|| bad(format!("line {}: meta needs a value", n + 1)))?;
                dump.meta.insert(k.into(), v.into());
            }
            _ => return Err(bad(format!("line {}: unexpected {line:?}", n + 1))),
        }
    }
    if !format_seen {
        return Err(bad("missing format line".into()));
    }
    if dump.dtype != DTYPE {
        return Err(Error::Dtype { path: hdr, found: dump.dtype });
    }
    if dump.shape.is_empty() || dump.axes.len() != dump.shape.len() {
        return Err(bad(format!("{} axes for a rank-{} shape", dump.axes.len(), dump.shape.len())));
    }
    let bin = with_ext(&stem, "bin");
    let bytes = std::fs::read(&bin).map_err(Error::io(&bin))?;
    let expected = 8 * dump.expected_len() as u64;
    if bytes.len() as u64 != expected {
        return Err(Error::Length { path: bin, expected, actual: bytes.len() as u64 });
    }
    dump.values = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok(dump)
}

fn expect_kind(dump: &GridDump, kind: &str) -> Result<()> {
    if dump.kind != kind {
        return Err(dump.bad(format!("expected a {kind} dump, found {:?}", dump.kind)));
    }
    Ok(())
}

fn expect_axes(dump: &GridDump, names: &[&str]) -> Result<()> {
    let found: Vec<&str> = dump.axes.iter().map(|a| a.name.as_str()).collect();
    if found != names {
        return Err(dump.bad(format!("axes {found:?}, expected {names:?}")));
    }
    Ok(())
}

pub fn mode_dump(mode: &EigenMode) -> GridDump {
    let g = mode.grid();
    let s = mode.shape();
    GridDump::new(
        "mode",
        vec![g.ny, g.nx],
        vec![Axis::new("y", g.y_min, g.dy), Axis::new("x", g.x_min, g.dx)],
        mode.psi().to_vec(),
    )
    .with_meta("k", mode.k())
    .with_meta("a", s.a())
    .with_meta("b", s.b())
    .with_meta("theta", s.theta())
    .with_meta("residual", mode.residual())
}

pub fn mode_from_dump(dump: &GridDump) -> Result<EigenMode> {
    expect_kind(dump, "mode")?;
    expect_axes(dump, &["y", "x"])?;
    let (y, x) = (&dump.axes[0], &dump.axes[1]);
    let grid = Grid2D::new(x.first, y.first, x.step, y.step, dump.shape[1], dump.shape[0])?;
    let shape = OvalShape::new(dump.meta_f64("a")?, dump.meta_f64("b")?, dump.meta_f64("theta")?)?;
    Ok(EigenMode::from_raw_parts(dump.meta_f64("k")?, dump.values.clone(), shape, grid, dump.meta_f64("residual")?)?)
}

pub fn wigner_dump(field: &WignerField) -> GridDump {
    let g = field.positions();
    let m = field.momentum();
    GridDump::new(
        "wigner",
        vec![g.ny, g.nx, m.np_x, m.np_y],
        vec![
            Axis::new("y", g.y_min, g.dy),
            Axis::new("x", g.x_min, g.dx),
            Axis::new("p_x", m.p_x(0), m.dp_x),
            Axis::new("p_y", m.p_y(0), m.dp_y),
        ],
        field.values().to_vec(),
    )
    .with_meta("drift", field.drift())
    .with_meta("imag_residual", field.imag_residual())
}

pub fn wigner_from_dump(dump: &GridDump) -> Result<WignerField> {
    expect_kind(dump, "wigner")?;
    expect_axes(dump, &["y", "x", "p_x", "p_y"])?;
    let a = &dump.axes;
    let positions = Grid2D::new(a[1].first, a[0].first, a[1].step, a[0].step, dump.shape[1], dump.shape[0])?;
    let momentum = MomentumGrid::new(dump.shape[2], dump.shape[3], a[2].step, a[3].step)?;
    if momentum.p_x(0) != a[2].first || momentum.p_y(0) != a[3].first {
        return Err(dump.bad("momentum axes are not centred".into()));
    }
    Ok(WignerField::from_values(dump.values.clone(), positions, momentum)?)
}

pub fn slice_dump(slice: &WignerSlice, kind: &str, names: [&str; 2]) -> GridDump {
    let step = |v: &[f64]| if v.len() > 1 { v[1] - v[0] } else { 0.0 };
    GridDump::new(
        kind,
        vec![slice.coords.len(), slice.momenta.len()],
        vec![
            Axis::new(names[0], slice.coords[0], step(&slice.coords)),
            Axis::new(names[1], slice.momenta[0], step(&slice.momenta)),
        ],
        slice.values.clone(),
    )
}
