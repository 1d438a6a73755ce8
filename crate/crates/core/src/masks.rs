//! Attention allow-matrices for full, strided and musical attention.
//!
//! Every mask is causal with the diagonal set. Whether query `q` may see key
//! `k` depends only on `q`, `k` and the roles at positions `0..=q`, so a row
//! can be produced incrementally while decoding.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tokenizer::{Role, META_LEN};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskKind {
    Full,
    Strided,
    Musical,
}

impl std::str::FromStr for MaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "full" => Ok(MaskKind::Full),
            "strided" => Ok(MaskKind::Strided),
            "musical" => Ok(MaskKind::Musical),
            other => Err(Error::InvalidConfig(format!("unknown mask kind {other:?}"))),
        }
    }
}

impl std::fmt::Display for MaskKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MaskKind::Full => "full",
            MaskKind::Strided => "strided",
            MaskKind::Musical => "musical",
        })
    }
}

/// Which mask to build and its two knobs, both in token units.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskSpec {
    pub kind: MaskKind,
    /// Local look-back: keys with `q - k < window` are always visible.
    pub window: usize,
    /// Period of the distant pattern in strided attention.
    pub stride: usize,
}

impl Default for MaskSpec {
    fn default() -> Self {
        MaskSpec {
            kind: MaskKind::Musical,
            window: 36,
            stride: 6,
        }
    }
}

impl MaskSpec {
    pub fn full() -> Self {
        MaskSpec {
            kind: MaskKind::Full,
            ..MaskSpec::default()
        }
    }

    pub fn strided(window: usize, stride: usize) -> Self {
        MaskSpec {
            kind: MaskKind::Strided,
            window,
            stride,
        }
    }

    pub fn musical(window: usize) -> Self {
        MaskSpec {
            kind: MaskKind::Musical,
            window,
            ..MaskSpec::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window == 0 || self.stride == 0 {
            return Err(Error::InvalidConfig(
                "mask window and stride must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Checks that `roles` can be masked under this spec.
    pub fn check_roles(&self, roles: &[Role]) -> Result<()> {
        match self.kind {
            MaskKind::Musical => check_musical_roles(roles),
            _ => Ok(()),
        }
    }

    /// May query `q` attend to key `k`? Assumes the roles were checked.
    #[inline]
    pub fn allows(&self, roles: &[Role], q: usize, k: usize) -> bool {
        if k > q {
            return false;
        }
        let distance = q - k;
        match self.kind {
            MaskKind::Full => true,
            MaskKind::Strided => {
                distance < self.window || distance.is_multiple_of(self.stride) || k < META_LEN
            }
            MaskKind::Musical => distance < self.window || musical_rule(roles[q], roles[k]),
        }
    }

    /// Row `q` of the mask over keys `0..=q`.
    pub fn row(&self, roles: &[Role], q: usize) -> Vec<bool> {
        (0..=q).map(|k| self.allows(roles, q, k)).collect()
    }

    pub fn build(&self, roles: &[Role]) -> Result<AttentionMask> {
        self.validate()?;
        self.check_roles(roles)?;
        let size = roles.len();
        let mut allowed = vec![false; size * size];
        for q in 0..size {
            for k in 0..=q {
                allowed[q * size + k] = self.allows(roles, q, k);
            }
        }
        Ok(AttentionMask { size, allowed })
    }
}

/// Role-pair dependencies of musical attention, beyond the local window.
fn musical_rule(query: Role, key: Role) -> bool {
    use Role::*;
    match query {
        MetaB | MetaK | MetaT => true,
        Pitch => matches!(key, MetaK | Pitch),
        Bar => matches!(key, MetaB | Start | Bar),
        Start => matches!(key, MetaT | Dur | Start),
        Dur => matches!(key, MetaT | Instr | Dur),
        Vel => matches!(key, Instr | Vel),
        Instr => key == Instr,
        Pad | Bos | Eos => false,
    }
}

/// Meta roles must occupy exactly the first three positions, in B, K, T order
/// (as many of them as the sequence is long).
fn check_musical_roles(roles: &[Role]) -> Result<()> {
    for (position, &role) in roles.iter().enumerate() {
        let ok = match Role::META.get(position) {
            Some(&expected) => role == expected,
            None => !role.is_meta(),
        };
        if !ok {
            let reason = match Role::META.get(position) {
                Some(expected) => format!("expected {expected}, found {role}"),
                None => format!("meta role {role} after the prefix"),
            };
            return Err(Error::RoleMismatch { position, reason });
        }
    }
    Ok(())
}

/// Dense `size x size` boolean matrix; `get(q, k)` is true when query `q`
/// may attend to key `k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AttentionMask {
    size: usize,
    allowed: Vec<bool>,
}

impl AttentionMask {
    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn get(&self, q: usize, k: usize) -> bool {
        self.allowed[q * self.size + k]
    }

    pub fn row(&self, q: usize) -> &[bool] {
        &self.allowed[q * self.size..(q + 1) * self.size]
    }

    pub fn count_row(&self, q: usize) -> usize {
        self.row(q).iter().filter(|&&b| b).count()
    }

    /// Element-wise inclusion.
    pub fn is_subset_of(&self, other: &AttentionMask) -> bool {
        self.size == other.size
            && self
                .allowed
                .iter()
                .zip(&other.allowed)
                .all(|(&a, &b)| !a || b)
    }

    /// Binary PGM (P5): allowed cells are white (255), the rest black.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.size, self.size).into_bytes();
        out.extend(self.allowed.iter().map(|&b| if b { 255u8 } else { 0 }));
        out
    }

    /// One line per query row, `1`/`0` per key, comma separated.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.size * self.size * 2);
        for q in 0..self.size {
            for (k, &b) in self.row(q).iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                out.push(if b { '1' } else { '0' });
            }
            out.push('\n');
        }
        out
    }

    /// Compact `#`/`.` rendering, handy in docs and debugging.
    pub fn to_ascii(&self) -> String {
        let mut out = String::new();
        for q in 0..self.size {
            for &b in self.row(q) {
                out.push(if b { '#' } else { '.' });
            }
            let _ = writeln!(out);
        }
        out
    }
}

pub fn full_causal_mask(roles: &[Role]) -> AttentionMask {
    MaskSpec::full().build(roles).expect("full mask accepts any roles")
}

pub fn strided_mask(roles: &[Role], window: usize, stride: usize) -> Result<AttentionMask> {
    MaskSpec::strided(window, stride).build(roles)
}

pub fn musical_mask(roles: &[Role], window: usize) -> Result<AttentionMask> {
    MaskSpec::musical(window).build(roles)
}

/// Roles of a well-formed stream of length `len`: meta prefix then notes,
/// the last one possibly cut short.
pub fn pattern_roles(len: usize) -> Vec<Role> {
    (0..len)
        .map(|i| match Role::META.get(i) {
            Some(&r) => r,
            None => Role::NOTE[(i - META_LEN) % Role::NOTE.len()],
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_mask_small_cases() {
        let m = full_causal_mask(&pattern_roles(3));
        assert_eq!(m.to_ascii(), "#..\n##.\n###\n");
        let one = full_causal_mask(&pattern_roles(1));
        assert_eq!(one.to_ascii(), "#\n");
        let big = full_causal_mask(&pattern_roles(40));
        for q in 0..40 {
            assert_eq!(big.count_row(q), q + 1);
        }
    }

    #[test]
    fn strided_example_row() {
        let roles = pattern_roles(10);
        let m = strided_mask(&roles, 2, 3).unwrap();
        let keys: Vec<usize> = (0..10).filter(|&k| m.get(7, k)).collect();
        assert_eq!(keys, vec![0, 1, 2, 4, 6, 7]);
    }

    #[test]
    fn strided_degenerates_to_full() {
        let roles = pattern_roles(30);
        let full = full_causal_mask(&roles);
        assert_eq!(strided_mask(&roles, 30, 7).unwrap(), full);
        assert_eq!(strided_mask(&roles, 1, 1).unwrap(), full);
    }

    #[test]
    fn musical_pitch_rows_see_key() {
        let roles = pattern_roles(3 + 6 * 8);
        let m = musical_mask(&roles, 1).unwrap();
        for q in 0..roles.len() {
            if roles[q] == Role::Pitch {
                assert!(m.get(q, 1));
            }
        }
    }

    #[test]
    fn musical_velocity_row_with_unit_window() {
        let roles = pattern_roles(3 + 6 * 3);
        let m = musical_mask(&roles, 1).unwrap();
        // last VEL of the third note
        let q = 3 + 6 * 3 - 1;
        let keys: Vec<usize> = (0..roles.len()).filter(|&k| m.get(q, k)).collect();
        // INSTR at 3, 9, 15 and VEL at 8, 14, 20
        assert_eq!(keys, vec![3, 8, 9, 14, 15, 20]);
    }

    #[test]
    fn musical_saturates_to_full() {
        let roles = pattern_roles(45);
        assert_eq!(musical_mask(&roles, 45).unwrap(), full_causal_mask(&roles));
    }

    #[test]
    fn musical_rejects_broken_prefix() {
        let mut roles = pattern_roles(12);
        roles.swap(0, 1);
        assert!(matches!(
            musical_mask(&roles, 4),
            Err(Error::RoleMismatch { position: 0, .. })
        ));
        let mut late_meta = pattern_roles(12);
        late_meta[7] = Role::MetaK;
        assert!(matches!(
            musical_mask(&late_meta, 4),
            Err(Error::RoleMismatch { position: 7, .. })
        ));
        // arbitrary note roles after the prefix are fine
        let mut shuffled = pattern_roles(12);
        shuffled.swap(5, 9);
        assert!(musical_mask(&shuffled, 4).is_ok());
    }

    #[test]
    fn zero_window_is_rejected() {
        assert!(strided_mask(&pattern_roles(4), 0, 2).is_err());
    }

    #[test]
    fn pgm_and_csv_shapes() {
        let m = full_causal_mask(&pattern_roles(2));
        assert_eq!(m.to_pgm(), b"P5\n2 2\n255\n\xff\x00\xff\xff".to_vec());
        assert_eq!(m.to_csv(), "1,0\n1,1\n");
    }
}
