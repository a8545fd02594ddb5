//! Grid archive over a behavior space: one elite per cell.

use std::fmt::Write as _;
use std::fs::File;
use std::io::Write as _;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::behavior::BcVector;
use crate::error::{Error, Result};
use crate::scenario::ScenarioParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BcKind {
    GoalDistance,
    HumanVariation,
    Rationality,
    HorizontalDistance,
    Collision,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BcDim {
    pub name: String,
    pub kind: BcKind,
    pub low: f64,
    pub high: f64,
    pub bins: usize,
}

impl BcDim {
    pub fn new(name: &str, kind: BcKind, low: f64, high: f64, bins: usize) -> Self {
        Self {
            name: name.to_string(),
            kind,
            low,
            high,
            bins,
        }
    }

    pub fn goal_distance() -> Self {
        Self::new("goal_distance", BcKind::GoalDistance, 0.0, 0.32, 25)
    }

    pub fn human_variation() -> Self {
        Self::new("human_variation", BcKind::HumanVariation, 0.0, 0.11, 100)
    }

    pub fn rationality() -> Self {
        Self::new("rationality", BcKind::Rationality, 0.0, 1000.0, 101)
    }

    pub fn horizontal_distance() -> Self {
        Self::new("horizontal_distance", BcKind::HorizontalDistance, 0.0, 0.25, 25)
    }

    pub fn collision() -> Self {
        Self::new("collision", BcKind::Collision, 0.0, 1.0, 2)
    }

    pub fn width(&self) -> f64 {
        (self.high - self.low) / self.bins as f64
    }

    /// Bin of `v`, plus whether it had to be clamped into range.
    fn bin(&self, v: f64) -> (usize, bool) {
        if v < self.low {
            return (0, true);
        }
        if v >= self.high {
            return (self.bins - 1, v > self.high);
        }
        let i = ((v - self.low) * self.bins as f64 / (self.high - self.low)).floor() as usize;
        (i.min(self.bins - 1), false)
    }
}

/// Tessellation of the behavior space into a regular grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BehaviorSpaceSpec {
    pub dims: Vec<BcDim>,
}

impl BehaviorSpaceSpec {
    pub fn new(dims: Vec<BcDim>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::Config("behavior space needs at least one dimension".into()));
        }
        for d in &dims {
            if d.bins == 0 || !(d.low < d.high) {
                return Err(Error::Config(format!("bad dimension {}: [{}, {}] x {}", d.name, d.low, d.high, d.bins)));
            }
        }
        Ok(Self { dims })
    }

    pub fn distance_rationality() -> Self {
        Self {
            dims: vec![BcDim::goal_distance(), BcDim::rationality()],
        }
    }

    pub fn distance_variation() -> Self {
        Self {
            dims: vec![BcDim::goal_distance(), BcDim::human_variation()],
        }
    }

    pub fn obstacle() -> Self {
        Self {
            dims: vec![BcDim::horizontal_distance(), BcDim::human_variation(), BcDim::collision()],
        }
    }

    pub fn cell_count(&self) -> usize {
        self.dims.iter().map(|d| d.bins).product()
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.dims).fold(0, |acc, (&i, d)| acc * d.bins + i)
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims.len()];
        for (slot, d) in out.iter_mut().zip(&self.dims).rev() {
            *slot = flat % d.bins;
            flat /= d.bins;
        }
        out
    }

    pub fn dim_of(&self, kind: BcKind) -> Option<usize> {
        self.dims.iter().position(|d| d.kind == kind)
    }
}

/// Grid coordinates of a behavior vector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CellIndex {
    pub multi: Vec<usize>,
    pub flat: usize,
    pub clamped: bool,
}

/// Half-open bins `[lo, hi)`; the upper bound falls in the last bin and
/// out-of-range values clamp to the edge bins.
pub fn cell_index(spec: &BehaviorSpaceSpec, bc: &BcVector) -> Result<CellIndex> {
    if bc.len() != spec.dims.len() {
        return Err(Error::BehaviorArity {
            expected: spec.dims.len(),
            got: bc.len(),
        });
    }
    let mut multi = Vec::with_capacity(bc.len());
    let mut clamped = false;
    for (dim, (&v, d)) in bc.values().iter().zip(&spec.dims).enumerate() {
        if v.is_nan() {
            return Err(Error::NonFiniteBehavior { dim });
        }
        let (i, c) = d.bin(v);
        multi.push(i);
        clamped |= c;
    }
    let flat = spec.flat_index(&multi);
    Ok(CellIndex { multi, flat, clamped })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Elite {
    pub scenario: ScenarioParams,
    pub f: f64,
    pub bc: BcVector,
    pub eval_index: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InsertStatus {
    NewCell,
    Improved,
    Rejected,
}

#[derive(Clone, Debug)]
pub struct Archive {
    spec: BehaviorSpaceSpec,
    cells: Vec<Option<Elite>>,
    /// Flat indices of occupied cells in order of first occupation.
    occupied: Vec<usize>,
    qd_score: f64,
    clamp_events: usize,
}

impl PartialEq for Archive {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec && self.cells == other.cells
    }
}

impl Archive {
    pub fn new(spec: BehaviorSpaceSpec) -> Self {
        let n = spec.cell_count();
        Self {
            spec,
            cells: vec![None; n],
            occupied: Vec::new(),
            qd_score: 0.0,
            clamp_events: 0,
        }
    }

    pub fn spec(&self) -> &BehaviorSpaceSpec {
        &self.spec
    }

    /// Inserts if the cell is empty or the incumbent is strictly worse.
    pub fn try_insert(&mut self, elite: Elite) -> Result<InsertStatus> {
        let idx = cell_index(&self.spec, &elite.bc)?;
        if idx.clamped {
            self.clamp_events += 1;
        }
        let slot = &mut self.cells[idx.flat];
        match slot {
            None => {
                self.qd_score += elite.f;
                *slot = Some(elite);
                self.occupied.push(idx.flat);
                Ok(InsertStatus::NewCell)
            }
            Some(old) if old.f < elite.f => {
                self.qd_score += elite.f - old.f;
                *slot = Some(elite);
                Ok(InsertStatus::Improved)
            }
            Some(_) => Ok(InsertStatus::Rejected),
        }
    }

    pub fn len(&self) -> usize {
        self.occupied.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occupied.is_empty()
    }

    /// Sum of elite assessments; empty cells count zero.
    pub fn qd_score(&self) -> f64 {
        self.qd_score
    }

    /// Recomputes the QD-Score from scratch.
    pub fn qd_score_exact(&self) -> f64 {
        self.elites().map(|e| e.f).sum()
    }

    pub fn coverage(&self) -> f64 {
        self.len() as f64 / self.spec.cell_count() as f64
    }

    pub fn clamp_events(&self) -> usize {
        self.clamp_events
    }

    pub fn get(&self, flat: usize) -> Option<&Elite> {
        self.cells.get(flat).and_then(Option::as_ref)
    }

    /// Elites in cell order.
    pub fn elites(&self) -> impl Iterator<Item = &Elite> {
        self.cells.iter().flatten()
    }

    /// `(flat index, elite)` in cell order.
    pub fn cells(&self) -> impl Iterator<Item = (usize, &Elite)> {
        self.cells.iter().enumerate().filter_map(|(i, c)| c.as_ref().map(|e| (i, e)))
    }

    /// Uniformly chosen elite.
    pub fn random_elite<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<&Elite> {
        if self.occupied.is_empty() {
            return None;
        }
        let flat = self.occupied[rng.random_range(0..self.occupied.len())];
        self.cells[flat].as_ref()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(file);
        let mut header: Vec<String> = self.spec.dims.iter().map(|d| format!("idx_{}", d.name)).collect();
        header.extend(self.spec.dims.iter().map(|d| d.name.clone()));
        header.extend(["f", "eval_index", "scenario"].map(String::from));
        w.write_record(&header)?;
        for (flat, e) in self.cells() {
            let mut row: Vec<String> = self.spec.multi_index(flat).iter().map(|i| i.to_string()).collect();
            row.extend(e.bc.values().iter().map(|v| v.to_string()));
            row.push(e.f.to_string());
            row.push(e.eval_index.to_string());
            row.push(e.scenario.to_json());
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    /// Rebuilds an archive from [`Archive::write_csv`] output.
    pub fn read_csv(path: &Path, spec: BehaviorSpaceSpec) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let k = spec.dims.len();
        let mut archive = Archive::new(spec);
        for record in r.records() {
            let record = record?;
            let num = |i: usize| -> Result<f64> {
                record
                    .get(i)
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| Error::Config(format!("{}: bad number in column {i}", path.display())))
            };
            let bc = BcVector((0..k).map(|i| num(k + i)).collect::<Result<_>>()?);
            let f = num(2 * k)?;
            let eval_index = num(2 * k + 1)? as usize;
            let scenario = serde_json::from_str(record.get(2 * k + 2).unwrap_or(""))?;
            archive.try_insert(Elite {
                scenario,
                f,
                bc,
                eval_index,
            })?;
        }
        Ok(archive)
    }

    /// Dense grids of elite `f` over the first two dimensions, one per
    /// combination of the remaining dimensions' bins.
    pub fn heatmap(&self) -> Vec<HeatmapSlice> {
        let dims = &self.spec.dims;
        let rows = dims[0].bins;
        let cols = dims.get(1).map_or(1, |d| d.bins);
        let slices: usize = dims.iter().skip(2).map(|d| d.bins).product();
        let mut out: Vec<HeatmapSlice> = (0..slices)
            .map(|s| {
                let mut rest = vec![0; dims.len().saturating_sub(2)];
                let mut q = s;
                for (slot, d) in rest.iter_mut().zip(dims.iter().skip(2)).rev() {
                    *slot = q % d.bins;
                    q /= d.bins;
                }
                let label = if rest.is_empty() {
                    "all".to_string()
                } else {
                    dims.iter()
                        .skip(2)
                        .zip(&rest)
                        .map(|(d, i)| format!("{}={}", d.name, i))
                        .collect::<Vec<_>>()
                        .join(";")
                };
                HeatmapSlice {
                    label,
                    row_dim: dims[0].name.clone(),
                    col_dim: dims.get(1).map_or_else(String::new, |d| d.name.clone()),
                    values: vec![vec![f64::NAN; cols]; rows],
                }
            })
            .collect();
        for (flat, e) in self.cells() {
            let multi = self.spec.multi_index(flat);
            let col = multi.get(1).copied().unwrap_or(0);
            let slice = multi
                .iter()
                .skip(2)
                .zip(dims.iter().skip(2))
                .fold(0, |acc, (&i, d)| acc * d.bins + i);
            out[slice].values[multi[0]][col] = e.f;
        }
        out
    }
}

/// Applies [`Archive::try_insert`] to every evaluation in order.
pub fn pseudo_archive<I>(evals: I, spec: BehaviorSpaceSpec) -> Result<Archive>
where
    I: IntoIterator<Item = Elite>,
{
    let mut archive = Archive::new(spec);
    for e in evals {
        archive.try_insert(e)?;
    }
    Ok(archive)
}

#[derive(Clone, Debug, PartialEq)]
pub struct HeatmapSlice {
    pub label: String,
    pub row_dim: String,
    pub col_dim: String,
    /// `values[row][col]`, NaN where the cell is empty.
    pub values: Vec<Vec<f64>>,
}

pub fn write_heatmap_csv(slices: &[HeatmapSlice], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let cols = slices.first().map_or(0, |s| s.values.first().map_or(0, Vec::len));
    let row_dim = slices.first().map_or("row", |s| s.row_dim.as_str());
    let mut header = vec!["slice".to_string(), format!("{row_dim}_bin")];
    header.extend((0..cols).map(|j| format!("b{j}")));
    w.write_record(&header)?;
    for s in slices {
        for (i, row) in s.values.iter().enumerate() {
            let mut rec = vec![s.label.clone(), i.to_string()];
            rec.extend(row.iter().map(|v| if v.is_nan() { "NaN".to_string() } else { v.to_string() }));
            w.write_record(&rec)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Blue (fast) to red (slow) color for `f` in `[0, max]`.
fn color(f: f64, max: f64) -> String {
    let t = if max > 0.0 { (f / max).clamp(0.0, 1.0) } else { 0.0 };
    let r = (255.0 * t).round() as u8;
    let b = (255.0 * (1.0 - t)).round() as u8;
    format!("#{r:02x}40{b:02x}")
}

/// Heatmap panels as a standalone SVG document. Rows run along x, columns
/// along y with the first bin at the bottom.
pub fn heatmap_svg(slices: &[HeatmapSlice], f_max: f64) -> String {
    const CELL: usize = 6;
    const PAD: usize = 30;
    let rows = slices.first().map_or(0, |s| s.values.len());
    let cols = slices.first().map_or(0, |s| s.values.first().map_or(0, Vec::len));
    let panel_w = rows * CELL + PAD;
    let width = panel_w * slices.len().max(1) + PAD;
    let height = cols * CELL + 2 * PAD;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    for (k, s) in slices.iter().enumerate() {
        let x0 = PAD + k * panel_w;
        let _ = writeln!(svg, r#"<text x="{x0}" y="{}" font-size="10">{}</text>"#, PAD / 2, s.label);
        let _ = writeln!(
            svg,
            r#"<rect x="{x0}" y="{PAD}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            rows * CELL,
            cols * CELL
        );
        for (i, row) in s.values.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if v.is_nan() {
                    continue;
                }
                let _ = writeln!(
                    svg,
                    r#"<rect x="{}" y="{}" width="{CELL}" height="{CELL}" fill="{}"/>"#,
                    x0 + i * CELL,
                    PAD + (cols - 1 - j) * CELL,
                    color(*v, f_max)
                );
            }
        }
        let _ = writeln!(
            svg,
            r#"<text x="{x0}" y="{}" font-size="10">{} (x) / {} (y)</text>"#,
            height - PAD / 3,
            s.row_dim,
            s.col_dim
        );
    }
    svg.push_str("</svg>\n");
    svg
}

pub fn write_heatmap_svg(slices: &[HeatmapSlice], f_max: f64, path: &Path) -> Result<()> {
    let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(heatmap_svg(slices, f_max).as_bytes())
        .map_err(|e| Error::io(path, e))
}
