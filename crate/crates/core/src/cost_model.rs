//! Analytical parameter and FLOPs accounting.
//!
//! Conventions: one multiply-add counts as 2 FLOPs, Multi-Adds are FLOPs / 2,
//! bias terms are ignored, and all feature maps live at the LR resolution
//! (upsampling happens in the tail). All arithmetic is exact integer math.
//!
//! Block structures (K = 3, input width taken as the growth rate):
//!
//! * shrink: for layer `i` in `1..=C` a 1x1 squeeze `i*G -> G` then a KxK
//!   conv `G -> G`; a final 1x1 fusion `C*G -> O`.
//! * group: as shrink, but the KxK convs are grouped with [`GROUPS`] groups.
//! * contextual: 2x2 average pooling puts every inner layer (squeezes, convs
//!   and fusion) at a quarter of the pixel count, the KxK convs run `R` times
//!   with shared weights, and a 1x1 sub-pixel conv `O -> 4*O` restores full
//!   resolution.
//!
//! The network adds a 3x3 head `3 -> G_first`, a 1x1 global fusion over the
//! concatenated active-block outputs `sum(O) -> 64`, and a tail made of a 3x3
//! conv `64 -> 64` followed by a 3x3 sub-pixel conv `64 -> 3*s^2`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::genome::{BlockGene, BlockType, Genome, Violation};

pub const KERNEL: u32 = 3;
/// Group count of group-type blocks. Divides every width in the search space.
pub const GROUPS: u32 = 4;
/// Pixel-count divisor of contextual-block inner layers (2x2 pooling).
pub const POOL_DIVISOR: u64 = 4;
pub const FUSION_CHANNELS: u32 = 64;
pub const TAIL_CHANNELS: u32 = 64;

#[derive(Debug, Error, PartialEq)]
pub enum CostError {
    #[error("cost arithmetic overflow")]
    Overflow,
    #[error("cost formula undefined for this C (non-integral result)")]
    NonIntegral,
    #[error("pooled block needs a pixel count divisible by 4, got {0}")]
    PoolingPixels(u64),
    #[error("invalid resolution: {0}")]
    Resolution(String),
    #[error("invalid genome: {}", join_violations(.0))]
    InvalidGenome(Vec<Violation>),
    #[error("cost inputs must be positive")]
    ZeroInput,
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

fn to_u64(v: u128) -> Result<u64, CostError> {
    u64::try_from(v).map_err(|_| CostError::Overflow)
}

fn mul(values: &[u128]) -> Result<u128, CostError> {
    values.iter().try_fold(1u128, |acc, &v| acc.checked_mul(v).ok_or(CostError::Overflow))
}

/// Closed-form FLOPs of a general residual dense block:
/// `2 * G^2 * S2 * (C*K^2 + C*(C+3)/2)`.
pub fn flops_rdb(layers: u32, kernel: u32, growth: u32, pixels: u64) -> Result<u64, CostError> {
    if layers == 0 || kernel == 0 || growth == 0 || pixels == 0 {
        return Err(CostError::ZeroInput);
    }
    let c = layers as u128;
    let k2 = mul(&[kernel as u128, kernel as u128])?;
    // 2 * (C*K^2 + C(C+3)/2) = 2*C*K^2 + C(C+3), always integral
    let bracket = mul(&[2, c, k2])?
        .checked_add(mul(&[c, c + 3])?)
        .ok_or(CostError::Overflow)?;
    to_u64(mul(&[growth as u128, growth as u128, pixels as u128, bracket])?)
}

/// Closed-form FLOPs of a contextual residual dense block:
/// `2 * G^2 * S2 * (C*K^2*R/4 + (C+7)(C+1)/8)`, evaluated exactly.
pub fn flops_crdb(
    layers: u32,
    kernel: u32,
    growth: u32,
    recursion: u32,
    pixels: u64,
) -> Result<u64, CostError> {
    if layers == 0 || kernel == 0 || growth == 0 || recursion == 0 || pixels == 0 {
        return Err(CostError::ZeroInput);
    }
    let c = layers as u128;
    let k2 = mul(&[kernel as u128, kernel as u128])?;
    // 8 * bracket = 2*C*K^2*R + (C+7)(C+1); result = G^2 * S2 * (8 * bracket) / 4
    let bracket8 = mul(&[2, c, k2, recursion as u128])?
        .checked_add(mul(&[c + 7, c + 1])?)
        .ok_or(CostError::Overflow)?;
    let numerator = mul(&[growth as u128, growth as u128, pixels as u128, bracket8])?;
    if numerator % 4 != 0 {
        return Err(CostError::NonIntegral);
    }
    to_u64(numerator / 4)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    /// 1x1 convolution.
    Pointwise,
    /// KxK convolution, possibly grouped.
    Spatial,
    /// Convolution whose output is pixel-shuffled to a larger resolution.
    SubPixel,
}

/// One convolution in a block or network inventory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerRecord {
    pub kind: LayerKind,
    pub in_ch: u32,
    pub out_ch: u32,
    pub kernel: u32,
    pub groups: u32,
    /// The layer runs on `pixels / pixel_divisor` positions (1 or 4).
    pub pixel_divisor: u64,
    /// Number of applications of the same weights.
    pub recursion: u32,
}

impl LayerRecord {
    fn new(kind: LayerKind, in_ch: u32, out_ch: u32, kernel: u32) -> Self {
        LayerRecord { kind, in_ch, out_ch, kernel, groups: 1, pixel_divisor: 1, recursion: 1 }
    }

    pub fn params(&self) -> Result<u64, CostError> {
        let dense = mul(&[
            self.in_ch as u128,
            self.out_ch as u128,
            self.kernel as u128,
            self.kernel as u128,
        ])?;
        to_u64(dense / self.groups as u128)
    }

    /// FLOPs when the enclosing block sees `pixels` positions.
    pub fn flops(&self, pixels: u64) -> Result<u64, CostError> {
        if !pixels.is_multiple_of(self.pixel_divisor) {
            return Err(CostError::PoolingPixels(pixels));
        }
        let positions = (pixels / self.pixel_divisor) as u128;
        to_u64(mul(&[2, self.params()? as u128, positions, self.recursion as u128])?)
    }
}

/// Enumerates the convolutions of a block, ignoring its state bit.
pub fn block_layer_inventory(gene: &BlockGene) -> Vec<LayerRecord> {
    let g = gene.growth;
    let (groups, divisor, recursion) = match gene.btype {
        BlockType::Shrink => (1, 1, 1),
        BlockType::Group => (GROUPS, 1, 1),
        BlockType::Contextual => (1, POOL_DIVISOR, gene.recursion),
    };
    let mut layers = Vec::with_capacity(2 * gene.layers as usize + 2);
    for i in 1..=gene.layers {
        let mut squeeze = LayerRecord::new(LayerKind::Pointwise, i * g, g, 1);
        squeeze.pixel_divisor = divisor;
        layers.push(squeeze);
        let mut conv = LayerRecord::new(LayerKind::Spatial, g, g, KERNEL);
        conv.groups = groups;
        conv.pixel_divisor = divisor;
        conv.recursion = recursion;
        layers.push(conv);
    }
    let mut fusion = LayerRecord::new(LayerKind::Pointwise, gene.layers * g, gene.out_channels, 1);
    fusion.pixel_divisor = divisor;
    layers.push(fusion);
    if gene.btype == BlockType::Contextual {
        let mut up = LayerRecord::new(LayerKind::SubPixel, gene.out_channels, 4 * gene.out_channels, 1);
        up.pixel_divisor = divisor;
        layers.push(up);
    }
    layers
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CostReport {
    pub params: u64,
    pub flops: u64,
    pub multi_adds: u64,
    pub lr_width: u32,
    pub lr_height: u32,
}

impl CostReport {
    fn from_layers(layers: &[LayerRecord], width: u32, height: u32) -> Result<Self, CostError> {
        let pixels = width as u64 * height as u64;
        let mut params = 0u64;
        let mut flops = 0u64;
        for l in layers {
            params = params.checked_add(l.params()?).ok_or(CostError::Overflow)?;
            flops = flops.checked_add(l.flops(pixels)?).ok_or(CostError::Overflow)?;
        }
        Ok(CostReport { params, flops, multi_adds: flops / 2, lr_width: width, lr_height: height })
    }

    fn zero(width: u32, height: u32) -> Self {
        CostReport { lr_width: width, lr_height: height, ..Default::default() }
    }

    fn add(&mut self, other: &CostReport) -> Result<(), CostError> {
        self.params = self.params.checked_add(other.params).ok_or(CostError::Overflow)?;
        self.flops = self.flops.checked_add(other.flops).ok_or(CostError::Overflow)?;
        self.multi_adds = self.flops / 2;
        Ok(())
    }
}

/// Cost of one block at an LR feature map of `width x height`. Inactive genes
/// cost nothing.
pub fn block_cost(gene: &BlockGene, width: u32, height: u32) -> Result<CostReport, CostError> {
    if !gene.active {
        return Ok(CostReport::zero(width, height));
    }
    CostReport::from_layers(&block_layer_inventory(gene), width, height)
}

/// HR target size and upscaling factor; the LR size is the exact quotient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolutionSpec {
    pub hr_width: u32,
    pub hr_height: u32,
    pub scale: u32,
}

impl ResolutionSpec {
    pub fn new(hr_width: u32, hr_height: u32, scale: u32) -> Result<Self, CostError> {
        let spec = ResolutionSpec { hr_width, hr_height, scale };
        spec.check()?;
        Ok(spec)
    }

    pub fn check(&self) -> Result<(), CostError> {
        if self.scale == 0 || self.hr_width == 0 || self.hr_height == 0 {
            return Err(CostError::Resolution("dimensions and scale must be positive".into()));
        }
        if !self.hr_width.is_multiple_of(self.scale) || !self.hr_height.is_multiple_of(self.scale) {
            return Err(CostError::Resolution(format!(
                "{}x{} is not divisible by scale {}",
                self.hr_width, self.hr_height, self.scale
            )));
        }
        Ok(())
    }

    /// 720p target. For x3, whose quotient of 1280 is not integral, the width
    /// is trimmed to 1278.
    pub fn hd720(scale: u32) -> Result<Self, CostError> {
        let width = if scale == 0 { 1280 } else { 1280 - 1280 % scale };
        Self::new(width, 720, scale)
    }

    pub fn lr_width(&self) -> u32 {
        self.hr_width / self.scale
    }

    pub fn lr_height(&self) -> u32 {
        self.hr_height / self.scale
    }

    pub fn lr_pixels(&self) -> u64 {
        self.lr_width() as u64 * self.lr_height() as u64
    }
}

/// Totals plus the per-stage breakdown of a decoded network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkCost {
    pub total: CostReport,
    pub head: CostReport,
    /// One report per chromosome position; inactive positions are zero.
    pub per_block: Vec<CostReport>,
    pub fusion: CostReport,
    pub tail: CostReport,
}

fn head_layers(first_growth: u32) -> Vec<LayerRecord> {
    vec![LayerRecord::new(LayerKind::Spatial, 3, first_growth, KERNEL)]
}

fn fusion_layers(concat_channels: u32) -> Vec<LayerRecord> {
    vec![LayerRecord::new(LayerKind::Pointwise, concat_channels, FUSION_CHANNELS, 1)]
}

fn tail_layers(scale: u32) -> Vec<LayerRecord> {
    vec![
        LayerRecord::new(LayerKind::Spatial, FUSION_CHANNELS, TAIL_CHANNELS, KERNEL),
        LayerRecord::new(LayerKind::SubPixel, TAIL_CHANNELS, 3 * scale * scale, KERNEL),
    ]
}

pub fn network_cost(genome: &Genome, res: &ResolutionSpec) -> Result<NetworkCost, CostError> {
    genome.validate().map_err(CostError::InvalidGenome)?;
    res.check()?;
    let (w, h) = (res.lr_width(), res.lr_height());
    let active: Vec<&BlockGene> = genome.blocks.iter().filter(|b| b.active).collect();
    let first_growth = active.first().map(|b| b.growth).unwrap_or(FUSION_CHANNELS);
    let concat: u32 = active.iter().map(|b| b.out_channels).sum();

    let head = CostReport::from_layers(&head_layers(first_growth), w, h)?;
    let fusion = CostReport::from_layers(&fusion_layers(concat), w, h)?;
    let tail = CostReport::from_layers(&tail_layers(res.scale), w, h)?;
    let per_block = genome
        .blocks
        .iter()
        .map(|b| block_cost(b, w, h))
        .collect::<Result<Vec<_>, _>>()?;

    let mut total = CostReport::zero(w, h);
    total.add(&head)?;
    for b in &per_block {
        total.add(b)?;
    }
    total.add(&fusion)?;
    total.add(&tail)?;
    Ok(NetworkCost { total, head, per_block, fusion, tail })
}

/// Report layout printed by the `cost` command.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostJson {
    pub params: u64,
    pub flops: u64,
    pub multi_adds: u64,
    pub hr: [u32; 2],
    pub scale: u32,
    pub per_block: Vec<CostReport>,
}

impl NetworkCost {
    pub fn to_json(&self, res: &ResolutionSpec) -> CostJson {
        CostJson {
            params: self.total.params,
            flops: self.total.flops,
            multi_adds: self.total.multi_adds,
            hr: [res.hr_width, res.hr_height],
            scale: res.scale,
            per_block: self.per_block.clone(),
        }
    }
}

/// Cost of a plain dense-block baseline with `blocks` identical shrink-style
/// blocks (`layers` convs, growth = out = `growth`) and the same head, fusion
/// and tail as searched networks. The block count may be below the search
/// minimum, so this bypasses genome validation.
pub fn dense_baseline_cost(
    blocks: u32,
    layers: u32,
    growth: u32,
    res: &ResolutionSpec,
) -> Result<CostReport, CostError> {
    res.check()?;
    let (w, h) = (res.lr_width(), res.lr_height());
    let gene = BlockGene::new(true, BlockType::Shrink, layers, growth, growth, 1);
    let mut total = CostReport::from_layers(&head_layers(growth), w, h)?;
    let block = block_cost(&gene, w, h)?;
    for _ in 0..blocks {
        total.add(&block)?;
    }
    total.add(&CostReport::from_layers(&fusion_layers(blocks * growth), w, h)?)?;
    total.add(&CostReport::from_layers(&tail_layers(res.scale), w, h)?)?;
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genome::{LAYER_CHOICES, MAX_BLOCKS, RECURSION_CHOICES, WIDTH_CHOICES};

    fn gene(t: BlockType, c: u32, g: u32, o: u32, r: u32) -> BlockGene {
        BlockGene::new(true, t, c, g, o, r)
    }

    // Independent closed form for shrink-block params.
    fn params_srdb(c: u64, k: u64, g: u64, o: u64) -> u64 {
        g * g * (c * k * k + c * (c + 1) / 2) + c * g * o
    }

    #[test]
    fn rdb_hand_values() {
        assert_eq!(flops_rdb(6, 3, 32, 1).unwrap(), 165_888);
        assert_eq!(flops_rdb(1, 1, 1, 1).unwrap(), 6);
        assert_eq!(flops_rdb(4, 3, 16, 100).unwrap(), 2_560_000);
    }

    #[test]
    fn crdb_hand_values() {
        assert_eq!(flops_crdb(6, 3, 32, 1, 4).unwrap(), 203_776);
        let gap = flops_crdb(6, 3, 32, 1, 4).unwrap() - flops_rdb(6, 3, 32, 4).unwrap() / 4;
        assert_eq!(gap, 37_888);
        assert!(flops_crdb(6, 3, 32, 4, 4).unwrap() < flops_rdb(6, 3, 32, 4).unwrap());
    }

    #[test]
    fn crdb_non_integral_is_reported() {
        // G=1, S2=1, C=1, K=1, R=1: (2 + 16) / 4 is not integral
        assert_eq!(flops_crdb(1, 1, 1, 1, 1), Err(CostError::NonIntegral));
    }

    #[test]
    fn overflow_is_detected() {
        assert_eq!(flops_rdb(8, 3, u32::MAX, u64::MAX), Err(CostError::Overflow));
        assert_eq!(flops_rdb(0, 3, 16, 1), Err(CostError::ZeroInput));
    }

    #[test]
    fn inventory_layer_counts() {
        let s = block_layer_inventory(&gene(BlockType::Shrink, 4, 16, 16, 1));
        assert_eq!(s.len(), 9);
        assert_eq!(s.iter().filter(|l| l.kind == LayerKind::Pointwise).count(), 5);
        let c = block_layer_inventory(&gene(BlockType::Contextual, 4, 16, 16, 2));
        assert_eq!(c.len(), 10);
        assert_eq!(c.last().unwrap().kind, LayerKind::SubPixel);
        assert!(c.iter().all(|l| l.pixel_divisor == POOL_DIVISOR));
    }

    #[test]
    fn shrink_params_match_closed_form() {
        let r = block_cost(&gene(BlockType::Shrink, 6, 32, 32, 1), 1, 1).unwrap();
        assert_eq!(r.params, 82_944);
        for c in LAYER_CHOICES {
            for g in WIDTH_CHOICES {
                for o in WIDTH_CHOICES {
                    let r = block_cost(&gene(BlockType::Shrink, c, g, o, 1), 1, 1).unwrap();
                    assert_eq!(r.params, params_srdb(c as u64, 3, g as u64, o as u64));
                }
            }
        }
    }

    #[test]
    fn shrink_flops_match_rdb_formula_when_out_equals_growth() {
        for c in LAYER_CHOICES {
            for g in WIDTH_CHOICES {
                let r = block_cost(&gene(BlockType::Shrink, c, g, g, 1), 10, 7).unwrap();
                assert_eq!(r.flops, flops_rdb(c, 3, g, 70).unwrap());
            }
        }
    }

    #[test]
    fn inactive_block_is_free() {
        let mut g = gene(BlockType::Contextual, 8, 64, 64, 4);
        g.active = false;
        assert_eq!(block_cost(&g, 10, 10).unwrap(), CostReport::zero(10, 10));
    }

    #[test]
    fn shrink_and_group_flops_are_twice_pixels_times_params() {
        for t in [BlockType::Shrink, BlockType::Group] {
            let r = block_cost(&gene(t, 6, 24, 48, 1), 13, 9).unwrap();
            assert_eq!(r.flops, 2 * 13 * 9 * r.params);
            assert_eq!(r.multi_adds * 2, r.flops);
        }
    }

    #[test]
    fn group_block_is_lighter_than_shrink() {
        for c in LAYER_CHOICES {
            for g in WIDTH_CHOICES {
                let s = block_cost(&gene(BlockType::Shrink, c, g, 32, 1), 4, 4).unwrap();
                let gr = block_cost(&gene(BlockType::Group, c, g, 32, 1), 4, 4).unwrap();
                assert!(gr.params < s.params);
            }
        }
    }

    #[test]
    fn contextual_pixels_must_divide_by_four() {
        let c = gene(BlockType::Contextual, 4, 16, 16, 1);
        assert_eq!(block_cost(&c, 3, 3), Err(CostError::PoolingPixels(9)));
        assert!(block_cost(&c, 2, 2).is_ok());
    }

    #[test]
    fn recursion_changes_flops_not_params() {
        let base = block_cost(&gene(BlockType::Contextual, 6, 32, 32, 1), 8, 8).unwrap();
        for r in 2..=4 {
            let x = block_cost(&gene(BlockType::Contextual, 6, 32, 32, r), 8, 8).unwrap();
            assert_eq!(x.params, base.params);
            assert!(x.flops > base.flops);
        }
    }

    #[test]
    fn block_flops_monotone_in_layers_growth_recursion() {
        for t in BlockType::ALL {
            for o in WIDTH_CHOICES {
                let recs: &[u32] = if t == BlockType::Contextual { &RECURSION_CHOICES } else { &[1] };
                for &r in recs {
                    for (ci, &c) in LAYER_CHOICES.iter().enumerate() {
                        for (gi, &g) in WIDTH_CHOICES.iter().enumerate() {
                            let f = block_cost(&gene(t, c, g, o, r), 8, 8).unwrap().flops;
                            if ci + 1 < LAYER_CHOICES.len() {
                                let next = gene(t, LAYER_CHOICES[ci + 1], g, o, r);
                                assert!(block_cost(&next, 8, 8).unwrap().flops >= f);
                            }
                            if gi + 1 < WIDTH_CHOICES.len() {
                                let next = gene(t, c, WIDTH_CHOICES[gi + 1], o, r);
                                assert!(block_cost(&next, 8, 8).unwrap().flops >= f);
                            }
                            if r < 4 && t == BlockType::Contextual {
                                let next = gene(t, c, g, o, r + 1);
                                assert!(block_cost(&next, 8, 8).unwrap().flops >= f);
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn resolution_spec_requires_exact_division() {
        assert!(ResolutionSpec::new(1280, 720, 3).is_err());
        let r = ResolutionSpec::hd720(3).unwrap();
        assert_eq!((r.lr_width(), r.lr_height()), (426, 240));
        let r = ResolutionSpec::hd720(2).unwrap();
        assert_eq!(r.lr_pixels(), 230_400);
    }

    fn five_shrink_genome() -> Genome {
        let mut blocks = vec![BlockGene::new(false, BlockType::Group, 4, 16, 16, 1); MAX_BLOCKS];
        for b in blocks.iter_mut().step_by(4) {
            *b = gene(BlockType::Shrink, 6, 32, 32, 1);
        }
        Genome { scale: 2, blocks }
    }

    #[test]
    fn network_cost_is_additive() {
        let g = five_shrink_genome();
        let res = ResolutionSpec::hd720(2).unwrap();
        let nc = network_cost(&g, &res).unwrap();
        let block = block_cost(&gene(BlockType::Shrink, 6, 32, 32, 1), 640, 360).unwrap();
        // head 3->32 3x3, fusion 160->64, tail 64->64 3x3 + 64->12 3x3
        let head = 3 * 32 * 9;
        let fusion = 5 * 32 * 64;
        let tail = 64 * 64 * 9 + 64 * 12 * 9;
        assert_eq!(nc.total.params, 5 * block.params + head + fusion + tail);
        assert_eq!(nc.per_block.len(), MAX_BLOCKS);
        assert_eq!(nc.total.multi_adds * 2, nc.total.flops);
    }

    #[test]
    fn doubling_resolution_quadruples_flops() {
        let g = five_shrink_genome();
        let a = network_cost(&g, &ResolutionSpec::new(1280, 720, 2).unwrap()).unwrap();
        let b = network_cost(&g, &ResolutionSpec::new(2560, 1440, 2).unwrap()).unwrap();
        assert_eq!(b.total.flops, 4 * a.total.flops);
        assert_eq!(b.total.params, a.total.params);
    }

    #[test]
    fn contextual_swap_cuts_flops() {
        let mut g = Genome {
            scale: 2,
            blocks: vec![gene(BlockType::Shrink, 8, 64, 64, 1); MAX_BLOCKS],
        };
        let res = ResolutionSpec::hd720(2).unwrap();
        let before = network_cost(&g, &res).unwrap().total;
        g.blocks[7] = gene(BlockType::Contextual, 8, 64, 64, 1);
        let after = network_cost(&g, &res).unwrap().total;
        assert!(after.flops < before.flops);
        assert!(after.params > before.params);
        assert!((after.params as f64) <= 1.02 * before.params as f64);
    }

    #[test]
    fn invalid_genome_is_rejected() {
        let mut g = five_shrink_genome();
        g.blocks[0].active = false;
        assert!(matches!(
            network_cost(&g, &ResolutionSpec::hd720(2).unwrap()),
            Err(CostError::InvalidGenome(_))
        ));
    }

    #[test]
    fn json_report_keys() {
        let g = five_shrink_genome();
        let res = ResolutionSpec::hd720(2).unwrap();
        let v = serde_json::to_value(network_cost(&g, &res).unwrap().to_json(&res)).unwrap();
        let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(keys, ["flops", "hr", "multi_adds", "params", "per_block", "scale"]);
        assert_eq!(v["hr"], serde_json::json!([1280, 720]));
    }
}
