//! Block search-space grammar and the fixed-length chromosome built from it.
//!
//! A [`Genome`] is always 20 [`BlockGene`]s long. Inactive genes stay in the
//! chromosome so that crossover and mutation can work position by position;
//! only active genes contribute to the decoded network.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Chromosome length.
pub const MAX_BLOCKS: usize = 20;
/// Minimum number of active blocks in a valid genome.
pub const MIN_ACTIVE: usize = 5;
/// Choices for the number of convolution layers inside a block.
pub const LAYER_CHOICES: [u32; 3] = [4, 6, 8];
/// Choices for growth rate and block output channels.
pub const WIDTH_CHOICES: [u32; 5] = [16, 24, 32, 48, 64];
/// Choices for the recursion count of contextual blocks.
pub const RECURSION_CHOICES: [u32; 4] = [1, 2, 3, 4];
/// Supported upscaling factors.
pub const SCALE_CHOICES: [u32; 3] = [2, 3, 4];
/// Number of distinct block genotypes in the search space.
pub const NUM_GENOTYPES: usize = 450;

const PLAIN_GENOTYPES: usize = LAYER_CHOICES.len() * WIDTH_CHOICES.len() * WIDTH_CHOICES.len();

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BlockType {
    /// Shrink residual dense block (1x1 squeeze before every conv).
    #[serde(rename = "S")]
    Shrink,
    /// Group residual dense block (grouped KxK convs with channel shuffle).
    #[serde(rename = "G")]
    Group,
    /// Contextual residual dense block (pooled, recursive, sub-pixel restore).
    #[serde(rename = "C")]
    Contextual,
}

impl BlockType {
    pub const ALL: [BlockType; 3] = [BlockType::Shrink, BlockType::Group, BlockType::Contextual];

    pub fn symbol(self) -> char {
        match self {
            BlockType::Shrink => 'S',
            BlockType::Group => 'G',
            BlockType::Contextual => 'C',
        }
    }

    pub fn from_symbol(c: char) -> Option<Self> {
        match c {
            'S' => Some(BlockType::Shrink),
            'G' => Some(BlockType::Group),
            'C' => Some(BlockType::Contextual),
            _ => None,
        }
    }

    fn index(self) -> usize {
        match self {
            BlockType::Shrink => 0,
            BlockType::Group => 1,
            BlockType::Contextual => 2,
        }
    }
}

impl fmt::Display for BlockType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

/// One block's genotype plus its on/off state.
///
/// Fields are public so that out-of-grammar genes can be represented and
/// reported by [`Genome::validate`]; use [`BlockGene::new`] to build genes that
/// are normalized (recursion forced to 1 on non-contextual blocks).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BlockGene {
    #[serde(rename = "state")]
    pub active: bool,
    #[serde(rename = "type")]
    pub btype: BlockType,
    pub layers: u32,
    pub growth: u32,
    #[serde(rename = "out")]
    pub out_channels: u32,
    #[serde(rename = "rec")]
    pub recursion: u32,
}

impl BlockGene {
    pub fn new(
        active: bool,
        btype: BlockType,
        layers: u32,
        growth: u32,
        out_channels: u32,
        recursion: u32,
    ) -> Self {
        let recursion = if btype == BlockType::Contextual { recursion } else { 1 };
        BlockGene { active, btype, layers, growth, out_channels, recursion }
    }

    pub fn genotype(&self) -> Genotype {
        Genotype {
            btype: self.btype,
            layers: self.layers,
            growth: self.growth,
            out_channels: self.out_channels,
            recursion: self.recursion,
        }
    }

    /// Replaces the architecture of this gene, keeping its state.
    pub fn with_genotype(&self, g: Genotype) -> Self {
        BlockGene::new(self.active, g.btype, g.layers, g.growth, g.out_channels, g.recursion)
    }

    fn field_violations(&self, position: usize, out: &mut Vec<Violation>) {
        if !LAYER_CHOICES.contains(&self.layers) {
            out.push(Violation::FieldOutOfRange { position, field: "layers", value: self.layers });
        }
        if !WIDTH_CHOICES.contains(&self.growth) {
            out.push(Violation::FieldOutOfRange { position, field: "growth", value: self.growth });
        }
        if !WIDTH_CHOICES.contains(&self.out_channels) {
            out.push(Violation::FieldOutOfRange {
                position,
                field: "out",
                value: self.out_channels,
            });
        }
        if !RECURSION_CHOICES.contains(&self.recursion) {
            out.push(Violation::FieldOutOfRange {
                position,
                field: "rec",
                value: self.recursion,
            });
        } else if self.recursion > 1 && self.btype != BlockType::Contextual {
            out.push(Violation::RecursionOnPlainBlock { position, recursion: self.recursion });
        }
    }

    pub fn is_valid(&self) -> bool {
        let mut v = Vec::new();
        self.field_violations(0, &mut v);
        v.is_empty()
    }
}

impl fmt::Display for BlockGene {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}{}{}g{}o{}r{}",
            u8::from(self.active),
            self.btype,
            self.layers,
            self.growth,
            self.out_channels,
            self.recursion
        )
    }
}

impl FromStr for BlockGene {
    type Err = String;

    /// Parses `<state><type><layers>g<growth>o<out>r<rec>`. Values are taken
    /// verbatim; range checks belong to validation.
    fn from_str(tok: &str) -> Result<Self, Self::Err> {
        let mut chars = tok.chars();
        let active = match chars.next() {
            Some('0') => false,
            Some('1') => true,
            other => return Err(format!("expected state 0|1, found {other:?}")),
        };
        let btype = match chars.next() {
            Some(c) => BlockType::from_symbol(c)
                .ok_or_else(|| format!("unknown block type {c:?}"))?,
            None => return Err("missing block type".into()),
        };
        let rest = chars.as_str();
        let (layers, rest) = rest.split_once('g').ok_or("missing 'g' separator")?;
        let (growth, rest) = rest.split_once('o').ok_or("missing 'o' separator")?;
        let (out, rec) = rest.split_once('r').ok_or("missing 'r' separator")?;
        let num = |s: &str, name: &str| {
            s.parse::<u32>().map_err(|_| format!("bad {name} value {s:?}"))
        };
        Ok(BlockGene {
            active,
            btype,
            layers: num(layers, "layers")?,
            growth: num(growth, "growth")?,
            out_channels: num(out, "out")?,
            recursion: num(rec, "rec")?,
        })
    }
}

/// A block architecture without its state bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Genotype {
    pub btype: BlockType,
    pub layers: u32,
    pub growth: u32,
    pub out_channels: u32,
    pub recursion: u32,
}

/// Dense index of a [`Genotype`] in `0..NUM_GENOTYPES`.
///
/// Enumeration is type-major (S, G, C), then layers, growth, out channels and
/// finally recursion. Shrink and group blocks have no recursion axis, so the
/// first 150 ids cover S and G and the remaining 300 cover C.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GenotypeId(pub u16);

impl GenotypeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn genotype(self) -> Result<Genotype, GenomeError> {
        let mut idx = self.index();
        if idx >= NUM_GENOTYPES {
            return Err(GenomeError::GenotypeOutOfRange(idx));
        }
        let (btype, rec_choices) = if idx < PLAIN_GENOTYPES {
            (BlockType::Shrink, 1)
        } else if idx < 2 * PLAIN_GENOTYPES {
            idx -= PLAIN_GENOTYPES;
            (BlockType::Group, 1)
        } else {
            idx -= 2 * PLAIN_GENOTYPES;
            (BlockType::Contextual, RECURSION_CHOICES.len())
        };
        let recursion = RECURSION_CHOICES[idx % rec_choices];
        idx /= rec_choices;
        let out_channels = WIDTH_CHOICES[idx % WIDTH_CHOICES.len()];
        idx /= WIDTH_CHOICES.len();
        let growth = WIDTH_CHOICES[idx % WIDTH_CHOICES.len()];
        idx /= WIDTH_CHOICES.len();
        let layers = LAYER_CHOICES[idx];
        Ok(Genotype { btype, layers, growth, out_channels, recursion })
    }

    pub fn all() -> impl Iterator<Item = GenotypeId> {
        (0..NUM_GENOTYPES as u16).map(GenotypeId)
    }
}

impl Genotype {
    pub fn id(&self) -> Result<GenotypeId, GenomeError> {
        let pos = |set: &[u32], v: u32, field: &'static str| {
            set.iter()
                .position(|&x| x == v)
                .ok_or(GenomeError::InvalidGene { field, value: v })
        };
        let l = pos(&LAYER_CHOICES, self.layers, "layers")?;
        let g = pos(&WIDTH_CHOICES, self.growth, "growth")?;
        let o = pos(&WIDTH_CHOICES, self.out_channels, "out")?;
        let r = pos(&RECURSION_CHOICES, self.recursion, "rec")?;
        let base = (l * WIDTH_CHOICES.len() + g) * WIDTH_CHOICES.len() + o;
        let id = match self.btype {
            BlockType::Contextual => 2 * PLAIN_GENOTYPES + base * RECURSION_CHOICES.len() + r,
            plain => {
                if r != 0 {
                    return Err(GenomeError::InvalidGene { field: "rec", value: self.recursion });
                }
                plain.index() * PLAIN_GENOTYPES + base
            }
        };
        Ok(GenotypeId(id as u16))
    }
}

/// Enumerates a gene's genotype; see [`GenotypeId`] for the ordering.
pub fn genotype_id(gene: &BlockGene) -> Result<GenotypeId, GenomeError> {
    gene.genotype().id()
}

#[derive(Debug, Error, PartialEq)]
pub enum GenomeError {
    #[error("genotype id {0} out of range (0..{NUM_GENOTYPES})")]
    GenotypeOutOfRange(usize),
    #[error("invalid gene: {field} = {value}")]
    InvalidGene { field: &'static str, value: u32 },
    #[error("token {index}: {message}")]
    Parse { index: usize, message: String },
    #[error("unsupported scale {0} (expected 2, 3 or 4)")]
    Scale(u32),
}

/// A single broken invariant found by [`Genome::validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    Length(usize),
    TooFewActive(usize),
    Scale(u32),
    FieldOutOfRange { position: usize, field: &'static str, value: u32 },
    RecursionOnPlainBlock { position: usize, recursion: u32 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Length(n) => write!(f, "length {n} != {MAX_BLOCKS}"),
            Violation::TooFewActive(n) => write!(f, "active blocks {n} < {MIN_ACTIVE}"),
            Violation::Scale(s) => write!(f, "scale {s} not in {{2, 3, 4}}"),
            Violation::FieldOutOfRange { position, field, value } => {
                write!(f, "block {position}: {field} = {value} out of range")
            }
            Violation::RecursionOnPlainBlock { position, recursion } => write!(
                f,
                "block {position}: recursion>1 on non-contextual block (rec = {recursion})"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Genome {
    pub scale: u32,
    pub blocks: Vec<BlockGene>,
}

impl Genome {
    pub fn active_count(&self) -> usize {
        self.blocks.iter().filter(|b| b.active).count()
    }

    /// Chromosome positions of the active blocks, in order.
    pub fn active_positions(&self) -> Vec<usize> {
        self.blocks
            .iter()
            .enumerate()
            .filter(|(_, b)| b.active)
            .map(|(i, _)| i)
            .collect()
    }

    /// Reports every broken invariant; an empty list means the genome is valid.
    pub fn validate(&self) -> Result<(), Vec<Violation>> {
        let mut v = Vec::new();
        if self.blocks.len() != MAX_BLOCKS {
            v.push(Violation::Length(self.blocks.len()));
        }
        if !SCALE_CHOICES.contains(&self.scale) {
            v.push(Violation::Scale(self.scale));
        }
        let active = self.active_count();
        if active < MIN_ACTIVE {
            v.push(Violation::TooFewActive(active));
        }
        for (i, b) in self.blocks.iter().enumerate() {
            b.field_violations(i, &mut v);
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(v)
        }
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_ok()
    }

    /// Compact text form: one token per block joined by `-`. Scale is not part
    /// of the text.
    pub fn encode_text(&self) -> String {
        let tokens: Vec<String> = self.blocks.iter().map(|b| b.to_string()).collect();
        tokens.join("-")
    }

    pub fn decode_text(s: &str, scale: u32) -> Result<Genome, GenomeError> {
        let blocks = s
            .trim()
            .split('-')
            .enumerate()
            .map(|(index, tok)| {
                tok.parse::<BlockGene>().map_err(|message| GenomeError::Parse { index, message })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Genome { scale, blocks })
    }

    /// Flips randomly chosen inactive genes on until at least [`MIN_ACTIVE`]
    /// blocks are active.
    pub fn repair<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let missing = MIN_ACTIVE.saturating_sub(self.active_count());
        if missing == 0 {
            return;
        }
        let mut inactive: Vec<usize> = (0..self.blocks.len()).filter(|&i| !self.blocks[i].active).collect();
        inactive.shuffle(rng);
        for &i in inactive.iter().take(missing) {
            self.blocks[i].active = true;
        }
    }
}

impl fmt::Display for Genome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.encode_text())
    }
}

fn random_gene<R: Rng + ?Sized>(rng: &mut R) -> BlockGene {
    let pick = |rng: &mut R, set: &[u32]| set[rng.gen_range(0..set.len())];
    let active = rng.gen_bool(0.5);
    let btype = BlockType::ALL[rng.gen_range(0..3)];
    let layers = pick(rng, &LAYER_CHOICES);
    let growth = pick(rng, &WIDTH_CHOICES);
    let out = pick(rng, &WIDTH_CHOICES);
    let rec = pick(rng, &RECURSION_CHOICES);
    BlockGene::new(active, btype, layers, growth, out, rec)
}

/// Samples every gene field uniformly, redrawing the whole chromosome until
/// at least [`MIN_ACTIVE`] blocks are active.
pub fn random_genome_with<R: Rng + ?Sized>(rng: &mut R, scale: u32) -> Result<Genome, GenomeError> {
    if !SCALE_CHOICES.contains(&scale) {
        return Err(GenomeError::Scale(scale));
    }
    loop {
        let blocks: Vec<BlockGene> = (0..MAX_BLOCKS).map(|_| random_gene(rng)).collect();
        let g = Genome { scale, blocks };
        if g.active_count() >= MIN_ACTIVE {
            return Ok(g);
        }
    }
}

/// Seeded convenience wrapper over [`random_genome_with`].
pub fn random_genome(seed: u64, scale: u32) -> Result<Genome, GenomeError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_genome_with(&mut rng, scale)
}
