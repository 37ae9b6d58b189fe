//! Vote ensembles and oracle upper-bound ensembles.
//!
//! `oracle_tp` keeps every voxel that some member labels correctly as
//! foreground, so its only errors are false negatives. `oracle_tn` keeps every
//! voxel that no member correctly rejects, so its only errors are false
//! positives. Both need ground truth and are diagnostic bounds, not models.

use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::volume::{BinaryMask, LabelVolume, Tissue};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EnsembleKind {
    Vote { k: usize },
    OracleTp,
    OracleTn,
}

impl EnsembleKind {
    pub fn is_oracle(self) -> bool {
        !matches!(self, EnsembleKind::Vote { .. })
    }
}

impl fmt::Display for EnsembleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EnsembleKind::Vote { k } => write!(f, "vote:k={k}"),
            EnsembleKind::OracleTp => f.write_str("oracle:tp"),
            EnsembleKind::OracleTn => f.write_str("oracle:tn"),
        }
    }
}

impl FromStr for EnsembleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |reason: &str| Error::EnsembleSpec {
            spec: s.to_string(),
            reason: reason.to_string(),
        };
        match s.trim() {
            "oracle:tp" => Ok(EnsembleKind::OracleTp),
            "oracle:tn" => Ok(EnsembleKind::OracleTn),
            other => {
                let k = other
                    .strip_prefix("vote:k=")
                    .ok_or_else(|| bad("expected vote:k=<n>, oracle:tp or oracle:tn"))?;
                let k: usize = k.parse().map_err(|_| bad("threshold is not an integer"))?;
                if k == 0 {
                    return Err(bad("threshold must be at least 1"));
                }
                Ok(EnsembleKind::Vote { k })
            }
        }
    }
}

impl Serialize for EnsembleKind {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// A named ensemble over an ordered list of member models.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EnsembleSpec {
    pub name: String,
    pub kind: EnsembleKind,
    pub members: Vec<String>,
}

impl EnsembleSpec {
    pub fn new(kind: EnsembleKind, members: Vec<String>) -> Result<Self> {
        let name = match kind {
            EnsembleKind::Vote { k } => format!("E{k}"),
            EnsembleKind::OracleTp => "E+*".to_string(),
            EnsembleKind::OracleTn => "E-*".to_string(),
        };
        Self::named(name, kind, members)
    }

    pub fn named(name: String, kind: EnsembleKind, members: Vec<String>) -> Result<Self> {
        let spec = Self { name, kind, members };
        spec.validate()?;
        Ok(spec)
    }

    /// Parse `"<kind>"` or `"<kind>@m1,m2,..."`; without a member list
    /// `default_members` is used.
    pub fn parse(text: &str, default_members: &[String]) -> Result<Self> {
        let (kind, members) = match text.split_once('@') {
            Some((k, m)) => (
                k,
                m.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect(),
            ),
            None => (text, default_members.to_vec()),
        };
        Self::new(kind.parse()?, members)
    }

    fn validate(&self) -> Result<()> {
        let n = self.members.len();
        let bad = |reason: String| Error::EnsembleSpec {
            spec: self.kind.to_string(),
            reason,
        };
        if n == 0 {
            return Err(bad("no member models".into()));
        }
        if let EnsembleKind::Vote { k } = self.kind {
            if !(1..=n).contains(&k) {
                return Err(bad(format!("threshold {k} outside 1..={n}")));
            }
        }
        Ok(())
    }

    pub fn is_oracle(&self) -> bool {
        self.kind.is_oracle()
    }
}

fn check_members(members: &[BinaryMask]) -> Result<&BinaryMask> {
    let first = members
        .first()
        .ok_or_else(|| Error::InvalidInput("ensemble needs at least one member".into()))?;
    for m in &members[1..] {
        first.check_geometry(m)?;
    }
    Ok(first)
}

/// Per-voxel vote counts.
pub fn vote_counts(members: &[BinaryMask]) -> Result<Vec<u16>> {
    let first = check_members(members)?;
    let mut counts = vec![0u16; first.voxels().len()];
    for m in members {
        for (c, &v) in counts.iter_mut().zip(m.voxels()) {
            *c += v as u16;
        }
    }
    Ok(counts)
}

/// True where at least `k` of the members are true.
pub fn vote(members: &[BinaryMask], k: usize) -> Result<BinaryMask> {
    let n = members.len();
    if !(1..=n).contains(&k) {
        return Err(Error::InvalidInput(format!("vote threshold {k} outside 1..={n}")));
    }
    let counts = vote_counts(members)?;
    members[0].map_voxels(counts.iter().map(|&c| c as usize >= k).collect())
}

/// Union of the members' true positives: `gt ∧ (∨ members)`.
pub fn oracle_tp(members: &[BinaryMask], gt: &BinaryMask) -> Result<BinaryMask> {
    check_members(members)?.check_geometry(gt)?;
    let mut any = vec![false; gt.voxels().len()];
    for m in members {
        for (a, &v) in any.iter_mut().zip(m.voxels()) {
            *a |= v;
        }
    }
    gt.map_voxels(any.iter().zip(gt.voxels()).map(|(&a, &g)| a && g).collect())
}

/// Complement of the union of the members' true negatives: `∧ (member ∨ gt)`.
pub fn oracle_tn(members: &[BinaryMask], gt: &BinaryMask) -> Result<BinaryMask> {
    check_members(members)?.check_geometry(gt)?;
    let mut all = vec![true; gt.voxels().len()];
    for m in members {
        for ((a, &v), &g) in all.iter_mut().zip(m.voxels()).zip(gt.voxels()) {
            *a &= v || g;
        }
    }
    gt.map_voxels(all)
}

/// Per-tissue vote recomposed into a label map.
#[derive(Debug, Clone)]
pub struct VoteComposition {
    pub volume: LabelVolume,
    /// Voxels that reached the threshold for more than one tissue.
    pub conflicts: usize,
}

/// Vote each tissue independently over label-map members, then recompose.
/// A voxel passing the threshold for several tissues takes the one with the
/// most votes, ties going to the lowest tissue code.
pub fn vote_label_maps(members: &[LabelVolume], k: usize) -> Result<VoteComposition> {
    let first = members
        .first()
        .ok_or_else(|| Error::InvalidInput("ensemble needs at least one member".into()))?;
    let n = members.len();
    if !(1..=n).contains(&k) {
        return Err(Error::InvalidInput(format!("vote threshold {k} outside 1..={n}")));
    }
    let mut per_tissue = Vec::with_capacity(4);
    for t in Tissue::ALL {
        let masks: Vec<BinaryMask> = members.iter().map(|m| m.extract_mask(t)).collect();
        per_tissue.push(vote_counts(&masks)?);
    }
    let len = first.voxels().len();
    let mut voxels = vec![0u8; len];
    let mut conflicts = 0;
    for (i, v) in voxels.iter_mut().enumerate() {
        let mut best: Option<(u16, u8)> = None;
        let mut passing = 0;
        for (t, counts) in Tissue::ALL.iter().zip(&per_tissue) {
            let c = counts[i];
            if c as usize >= k {
                passing += 1;
                if best.is_none_or(|(bc, _)| c > bc) {
                    best = Some((c, t.code()));
                }
            }
        }
        if passing > 1 {
            conflicts += 1;
        }
        *v = best.map_or(0, |(_, code)| code);
    }
    let volume = LabelVolume::new(first.dims(), first.spacing(), voxels)?
        .with_through_plane_axis(first.through_plane_axis());
    Ok(VoteComposition { volume, conflicts })
}
