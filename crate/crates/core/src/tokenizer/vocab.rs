use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const KEY_COUNT: usize = 24;
pub const TEMPO_BINS: usize = 16;
pub const INSTRUMENT_CLASSES: usize = 10;
pub const PITCH_COUNT: usize = 84;
pub const START_POSITIONS: usize = 48;
pub const DURATION_BINS: usize = 12;
pub const VELOCITY_BINS: usize = 16;
pub const DEFAULT_MAX_BARS: usize = 256;

/// What a token id stands for. Ordering follows the id layout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Role {
    MetaB,
    MetaK,
    MetaT,
    Instr,
    Pitch,
    Bar,
    Start,
    Dur,
    Vel,
    Pad,
    Bos,
    Eos,
}

impl Role {
    pub const ALL: [Role; 12] = [
        Role::MetaB,
        Role::MetaK,
        Role::MetaT,
        Role::Instr,
        Role::Pitch,
        Role::Bar,
        Role::Start,
        Role::Dur,
        Role::Vel,
        Role::Pad,
        Role::Bos,
        Role::Eos,
    ];

    /// The six per-note roles in emission order.
    pub const NOTE: [Role; 6] = [
        Role::Instr,
        Role::Pitch,
        Role::Bar,
        Role::Start,
        Role::Dur,
        Role::Vel,
    ];

    pub const META: [Role; 3] = [Role::MetaB, Role::MetaK, Role::MetaT];

    pub fn is_meta(self) -> bool {
        matches!(self, Role::MetaB | Role::MetaK | Role::MetaT)
    }

    pub fn is_note(self) -> bool {
        Role::NOTE.contains(&self)
    }

    /// Position of this role inside a note (0 for `Instr` .. 5 for `Vel`).
    pub fn note_slot(self) -> Option<usize> {
        Role::NOTE.iter().position(|&r| r == self)
    }

    /// Role expected after a token of this role in a well-formed stream.
    pub fn successor(self) -> Role {
        match self {
            Role::MetaB => Role::MetaK,
            Role::MetaK => Role::MetaT,
            Role::MetaT | Role::Vel => Role::Instr,
            Role::Instr => Role::Pitch,
            Role::Pitch => Role::Bar,
            Role::Bar => Role::Start,
            Role::Start => Role::Dur,
            Role::Dur => Role::Vel,
            Role::Bos => Role::MetaB,
            Role::Pad | Role::Eos => Role::Pad,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Role::MetaB => "META_B",
            Role::MetaK => "META_K",
            Role::MetaT => "META_T",
            Role::Instr => "INSTR",
            Role::Pitch => "PITCH",
            Role::Bar => "BAR",
            Role::Start => "START",
            Role::Dur => "DUR",
            Role::Vel => "VEL",
            Role::Pad => "PAD",
            Role::Bos => "BOS",
            Role::Eos => "EOS",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub role: Role,
    pub offset: u32,
    pub size: u32,
}

/// Token-id layout: one contiguous block per role, in `Role` order.
///
/// The bar-count block holds `max_bars` entries for B = 1..=max_bars, and the
/// bar block holds `max_bars` entries for bar indices 0..max_bars.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    max_bars: usize,
    blocks: Vec<Block>,
    size: usize,
}

#[derive(Serialize, Deserialize)]
struct VocabularyFile {
    max_bars: usize,
    size: usize,
    hash: String,
    blocks: Vec<Block>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Vocabulary::new(DEFAULT_MAX_BARS)
    }
}

impl Vocabulary {
    pub fn new(max_bars: usize) -> Self {
        assert!(max_bars >= 1, "max_bars must be positive");
        let mut offset = 0u32;
        let blocks = Role::ALL
            .iter()
            .map(|&role| {
                let size = match role {
                    Role::MetaB | Role::Bar => max_bars,
                    Role::MetaK => KEY_COUNT,
                    Role::MetaT => TEMPO_BINS,
                    Role::Instr => INSTRUMENT_CLASSES,
                    Role::Pitch => PITCH_COUNT,
                    Role::Start => START_POSITIONS,
                    Role::Dur => DURATION_BINS,
                    Role::Vel => VELOCITY_BINS,
                    Role::Pad | Role::Bos | Role::Eos => 1,
                } as u32;
                let block = Block { role, offset, size };
                offset += size;
                block
            })
            .collect();
        Vocabulary {
            max_bars,
            blocks,
            size: offset as usize,
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn max_bars(&self) -> usize {
        self.max_bars
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn block(&self, role: Role) -> Block {
        self.blocks[role as usize]
    }

    pub fn offset(&self, role: Role) -> u32 {
        self.block(role).offset
    }

    pub fn role(&self, id: u32) -> Option<Role> {
        if id as usize >= self.size {
            return None;
        }
        // blocks are sorted by offset
        let idx = self.blocks.partition_point(|b| b.offset <= id) - 1;
        Some(self.blocks[idx].role)
    }

    /// Splits an id into its role and the value within the role's block.
    pub fn decode(&self, id: u32) -> Option<(Role, u32)> {
        self.role(id).map(|r| (r, id - self.offset(r)))
    }

    /// Id of `value` inside `role`'s block. Panics if `value` is outside it.
    pub fn token(&self, role: Role, value: u32) -> u32 {
        let block = self.block(role);
        assert!(
            value < block.size,
            "value {value} outside {role} block of size {}",
            block.size
        );
        block.offset + value
    }

    pub fn pad(&self) -> u32 {
        self.offset(Role::Pad)
    }

    pub fn bos(&self) -> u32 {
        self.offset(Role::Bos)
    }

    pub fn eos(&self) -> u32 {
        self.offset(Role::Eos)
    }

    fn canonical_layout(&self) -> String {
        serde_json::to_string(&(self.max_bars, &self.blocks)).expect("layout serializes")
    }

    /// Stable 64-bit fingerprint of the layout: the first eight bytes of the
    /// SHA-256 of its canonical JSON, read little-endian.
    pub fn hash(&self) -> u64 {
        let digest = Sha256::digest(self.canonical_layout().as_bytes());
        u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
    }

    pub fn to_json(&self) -> String {
        let file = VocabularyFile {
            max_bars: self.max_bars,
            size: self.size,
            hash: format!("{:016x}", self.hash()),
            blocks: self.blocks.clone(),
        };
        serde_json::to_string_pretty(&file).expect("vocabulary serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: VocabularyFile = serde_json::from_str(text)?;
        let vocab = Vocabulary::new(file.max_bars);
        if vocab.blocks != file.blocks || vocab.size != file.size {
            return Err(Error::BadFormat {
                path: None,
                reason: "vocabulary layout does not match its max_bars".into(),
            });
        }
        Ok(vocab)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Vocabulary::from_json(&text).map_err(|e| match e {
            Error::BadFormat { reason, .. } => Error::BadFormat {
                path: Some(path.to_path_buf()),
                reason,
            },
            other => other,
        })
    }
}
