//! Mixed input domain: `p` quantitative coordinates on the unit interval and
//! `q` qualitative factors whose levels are 1-based indices.

use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{Error, Result};
use crate::report::fmt_f64;

pub const DATASET_SCHEMA: &str = "# schema: mixact-dataset v1";

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DesignSpace {
    p: usize,
    levels: Vec<u32>,
}

impl DesignSpace {
    /// `levels[h]` is the number of levels `m_h` of factor `h`; each must be at least 2.
    pub fn new(p: usize, levels: Vec<u32>) -> Result<Self> {
        if p + levels.len() == 0 {
            return Err(Error::InvalidSpace("need at least one input".into()));
        }
        if let Some(h) = levels.iter().position(|&m| m < 2) {
            return Err(Error::InvalidSpace(format!(
                "factor {h} has {} levels, need at least 2",
                levels[h]
            )));
        }
        Ok(Self { p, levels })
    }

    pub fn quantitative(p: usize) -> Result<Self> {
        Self::new(p, Vec::new())
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn q(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &[u32] {
        &self.levels
    }

    /// `M`, the number of level combinations (1 when there are no factors).
    pub fn n_combinations(&self) -> usize {
        self.levels.iter().map(|&m| m as usize).product()
    }

    pub fn combinations(&self) -> Vec<LevelCombination> {
        enumerate_level_combinations(self)
    }

    /// Position of `z` in the lexicographic enumeration.
    pub fn combination_index(&self, z: &[u32]) -> usize {
        z.iter()
            .zip(&self.levels)
            .fold(0, |acc, (&l, &m)| acc * m as usize + (l as usize - 1))
    }

    pub fn validate(&self, w: &MixedPoint) -> std::result::Result<(), PointViolation> {
        validate_point(self, w)
    }
}

impl fmt::Display for DesignSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p={}, levels={:?}", self.p, self.levels)
    }
}

/// One input `w = (x, z)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixedPoint {
    pub x: Vec<f64>,
    pub z: Vec<u32>,
}

impl MixedPoint {
    pub fn new(x: Vec<f64>, z: Vec<u32>) -> Self {
        Self { x, z }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LevelCombination(pub Vec<u32>);

impl fmt::Display for LevelCombination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(u32::to_string).collect();
        write!(f, "({})", parts.join(","))
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum PointViolation {
    #[error("x has {got} coordinates, expected {expected}")]
    XLength { expected: usize, got: usize },
    #[error("z has {got} levels, expected {expected}")]
    ZLength { expected: usize, got: usize },
    #[error("x[{index}] out of [0,1]")]
    XOutOfRange { index: usize, value: f64 },
    #[error("z[{index}] is below 1")]
    ZBelowOne { index: usize },
    #[error("z[{index}] exceeds {max}")]
    ZExceeds { index: usize, value: u32, max: u32 },
}

/// All level combinations in lexicographic order of `(z_1, ..., z_q)`.
pub fn enumerate_level_combinations(space: &DesignSpace) -> Vec<LevelCombination> {
    let mut out = vec![LevelCombination(Vec::with_capacity(space.q()))];
    for &m in space.levels() {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (1..=m).map(move |l| {
                    let mut z = prefix.0.clone();
                    z.push(l);
                    LevelCombination(z)
                })
            })
            .collect();
    }
    out
}

pub fn validate_point(space: &DesignSpace, w: &MixedPoint) -> std::result::Result<(), PointViolation> {
    if w.x.len() != space.p() {
        return Err(PointViolation::XLength {
            expected: space.p(),
            got: w.x.len(),
        });
    }
    if w.z.len() != space.q() {
        return Err(PointViolation::ZLength {
            expected: space.q(),
            got: w.z.len(),
        });
    }
    for (index, &value) in w.x.iter().enumerate() {
        if !(0.0..=1.0).contains(&value) {
            return Err(PointViolation::XOutOfRange { index, value });
        }
    }
    for (index, (&value, &max)) in w.z.iter().zip(space.levels()).enumerate() {
        if value < 1 {
            return Err(PointViolation::ZBelowOne { index });
        }
        if value > max {
            return Err(PointViolation::ZExceeds { index, value, max });
        }
    }
    Ok(())
}

/// Evaluated design points. Points are unique under exact equality.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    space: DesignSpace,
    points: Vec<MixedPoint>,
    responses: Vec<f64>,
}

impl Dataset {
    pub fn new(space: DesignSpace) -> Self {
        Self {
            space,
            points: Vec::new(),
            responses: Vec::new(),
        }
    }

    pub fn from_parts(space: DesignSpace, points: Vec<MixedPoint>, responses: Vec<f64>) -> Result<Self> {
        if points.len() != responses.len() {
            return Err(Error::InvalidArgument(format!(
                "{} points but {} responses",
                points.len(),
                responses.len()
            )));
        }
        let mut data = Self::new(space);
        for (w, y) in points.into_iter().zip(responses) {
            data.push(w, y)?;
        }
        Ok(data)
    }

    pub fn push(&mut self, w: MixedPoint, y: f64) -> Result<()> {
        self.space.validate(&w)?;
        if !y.is_finite() {
            return Err(Error::InvalidArgument(format!("non-finite response {y}")));
        }
        if self.contains(&w) {
            return Err(Error::DuplicatePoint {
                index: self.points.len(),
            });
        }
        self.points.push(w);
        self.responses.push(y);
        Ok(())
    }

    pub fn contains(&self, w: &MixedPoint) -> bool {
        self.points.iter().any(|p| p == w)
    }

    pub fn space(&self) -> &DesignSpace {
        &self.space
    }

    pub fn points(&self) -> &[MixedPoint] {
        &self.points
    }

    pub fn responses(&self) -> &[f64] {
        &self.responses
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        write_points_csv(&self.space, &self.points, Some(&self.responses), out)
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
            .map_err(|e| Error::io(path, e))
    }

    /// Reads the `x1..xp, z1..zq, y` schema; `p` and `q` are inferred from the
    /// header and factor level counts must be supplied by `levels`.
    pub fn read_csv<R: BufRead>(input: R, levels: Vec<u32>, origin: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(input);
        let headers = reader
            .headers()
            .map_err(|e| Error::data(origin, e.to_string()))?
            .clone();
        let p = headers.iter().filter(|h| h.starts_with('x')).count();
        let q = headers.iter().filter(|h| h.starts_with('z')).count();
        if headers.len() != p + q + 1 || headers.get(p + q) != Some("y") {
            return Err(Error::data(origin, "header must be x1..xp,z1..zq,y"));
        }
        if q != levels.len() {
            return Err(Error::data(
                origin,
                format!("{q} factor columns but {} level counts", levels.len()),
            ));
        }
        let space = DesignSpace::new(p, levels)?;
        let mut data = Dataset::new(space);
        for (row, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::data(origin, e.to_string()))?;
            let bad = |what: &str| Error::data(origin, format!("row {}: bad {what}", row + 1));
            let x = (0..p)
                .map(|k| record[k].parse::<f64>().map_err(|_| bad("x")))
                .collect::<Result<Vec<_>>>()?;
            let z = (0..q)
                .map(|h| record[p + h].parse::<u32>().map_err(|_| bad("z")))
                .collect::<Result<Vec<_>>>()?;
            let y = record[p + q].parse::<f64>().map_err(|_| bad("y"))?;
            data.push(MixedPoint::new(x, z), y)?;
        }
        Ok(data)
    }
}

/// Writes points in the dataset schema; `responses` of `None` drops the `y` column.
pub fn write_points_csv<W: Write>(
    space: &DesignSpace,
    points: &[MixedPoint],
    responses: Option<&[f64]>,
    mut out: W,
) -> std::io::Result<()> {
    writeln!(out, "{DATASET_SCHEMA}")?;
    let mut header: Vec<String> = (1..=space.p()).map(|k| format!("x{k}")).collect();
    header.extend((1..=space.q()).map(|h| format!("z{h}")));
    if responses.is_some() {
        header.push("y".into());
    }
    writeln!(out, "{}", header.join(","))?;
    for (i, w) in points.iter().enumerate() {
        let mut row: Vec<String> = w.x.iter().map(|&v| fmt_f64(v)).collect();
        row.extend(w.z.iter().map(u32::to_string));
        if let Some(ys) = responses {
            row.push(fmt_f64(ys[i]));
        }
        writeln!(out, "{}", row.join(","))?;
    }
    out.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combinations_single_factor() {
        let space = DesignSpace::new(1, vec![3]).unwrap();
        let combos = enumerate_level_combinations(&space);
        assert_eq!(
            combos,
            vec![
                LevelCombination(vec![1]),
                LevelCombination(vec![2]),
                LevelCombination(vec![3])
            ]
        );
    }

    #[test]
    fn combinations_without_factors_is_one_empty() {
        let space = DesignSpace::quantitative(2).unwrap();
        assert_eq!(enumerate_level_combinations(&space), vec![LevelCombination(vec![])]);
        assert_eq!(space.n_combinations(), 1);
    }

    #[test]
    fn combinations_lexicographic() {
        let space = DesignSpace::new(2, vec![2, 3]).unwrap();
        let combos = space.combinations();
        assert_eq!(combos.len(), 6);
        assert_eq!(combos[0].0, vec![1, 1]);
        assert_eq!(combos[1].0, vec![1, 2]);
        assert_eq!(combos[5].0, vec![2, 3]);
        for (i, c) in combos.iter().enumerate() {
            assert_eq!(space.combination_index(&c.0), i);
        }
    }

    #[test]
    fn rejects_degenerate_spaces() {
        assert!(DesignSpace::new(0, vec![]).is_err());
        assert!(DesignSpace::new(1, vec![1]).is_err());
        assert!(DesignSpace::new(0, vec![2]).is_ok());
    }

    #[test]
    fn validation_messages() {
        let space = DesignSpace::new(1, vec![3]).unwrap();
        assert!(space.validate(&MixedPoint::new(vec![0.5], vec![3])).is_ok());
        let err = space.validate(&MixedPoint::new(vec![1.5], vec![1])).unwrap_err();
        assert_eq!(err.to_string(), "x[0] out of [0,1]");
        let err = space.validate(&MixedPoint::new(vec![0.5], vec![4])).unwrap_err();
        assert_eq!(err.to_string(), "z[0] exceeds 3");
        assert!(matches!(
            space.validate(&MixedPoint::new(vec![0.5, 0.1], vec![1])),
            Err(PointViolation::XLength { .. })
        ));
        assert!(matches!(
            space.validate(&MixedPoint::new(vec![f64::NAN], vec![1])),
            Err(PointViolation::XOutOfRange { .. })
        ));
    }

    #[test]
    fn dataset_rejects_duplicates() {
        let space = DesignSpace::new(1, vec![2]).unwrap();
        let mut data = Dataset::new(space);
        data.push(MixedPoint::new(vec![0.25], vec![1]), 1.0).unwrap();
        data.push(MixedPoint::new(vec![0.25], vec![2]), 1.0).unwrap();
        let err = data.push(MixedPoint::new(vec![0.25], vec![1]), 2.0).unwrap_err();
        assert!(matches!(err, Error::DuplicatePoint { index: 2 }));
        assert_eq!(data.len(), 2);
    }

    #[test]
    fn csv_round_trip() {
        let space = DesignSpace::new(2, vec![3]).unwrap();
        let data = Dataset::from_parts(
            space,
            vec![
                MixedPoint::new(vec![0.1, 0.2], vec![1]),
                MixedPoint::new(vec![0.3, 1.0 / 3.0], vec![3]),
            ],
            vec![1.5, -2.0e-7],
        )
        .unwrap();
        let mut buf = Vec::new();
        data.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(DATASET_SCHEMA));
        assert!(text.lines().nth(1).unwrap() == "x1,x2,z1,y");
        let back = Dataset::read_csv(&buf[..], vec![3], Path::new("mem")).unwrap();
        assert_eq!(back, data);
    }
}
