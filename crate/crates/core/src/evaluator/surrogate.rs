//! Deterministic closed-form stand-in for trained-network PSNR.
//!
//! Gene quality at chromosome position `d`:
//!
//! ```text
//! q = w_type * (C / 8) * sqrt(G / 64) * rho(R) * 0.97^d + 0.05 * u
//! ```
//!
//! with `w_S = 0.60`, `w_G = 0.55`, `w_C = 0.70`, `rho = [1.0, 1.08, 1.12, 1.13]`
//! for `R = 1..4`, and `u` in `[-1, 1)` a hash of (genome text, d, seed).
//! The k-th active gene (1-based) contributes `q / (1 + 0.02 k)`, so
//! `prefix[k] = 28.0 + sum_{i <= k} q_i / (1 + 0.02 i)`.
//!
//! Hash: `h = mix(fnv1a64(text) ^ mix(seed ^ mix(d)))` where `mix` is the
//! splitmix64 finalizer (increment 0x9E3779B97F4A7C15, multipliers
//! 0xBF58476D1CE4E5B9 and 0x94D049BB133111EB, shifts 30/27/31) and fnv1a64
//! uses offset 0xCBF29CE484222325 and prime 0x100000001B3. Then
//! `u = (h >> 11) / 2^53 * 2 - 1`.

use crate::genome::{BlockGene, BlockType, Genome};

use super::{EvalError, EvalRequest, EvalResponse, Evaluator};

pub const SURROGATE_FLOOR: f64 = 28.0;
const NOISE_AMPLITUDE: f64 = 0.05;
const DEPTH_DECAY: f64 = 0.97;
const DIMINISHING: f64 = 0.02;
const RECURSION_GAIN: [f64; 4] = [1.0, 1.08, 1.12, 1.13];

fn type_weight(t: BlockType) -> f64 {
    match t {
        BlockType::Shrink => 0.60,
        BlockType::Group => 0.55,
        BlockType::Contextual => 0.70,
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xCBF2_9CE4_8422_2325, |h, &b| (h ^ b as u64).wrapping_mul(0x0100_0000_01B3))
}

/// Pseudo-noise in `[-1, 1)` for a gene at position `depth`.
pub fn noise_unit(genome_text: &str, depth: usize, seed: u64) -> f64 {
    let h = splitmix64(fnv1a64(genome_text.as_bytes()) ^ splitmix64(seed ^ splitmix64(depth as u64)));
    (h >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
}

fn base_quality(gene: &BlockGene, depth: usize) -> f64 {
    let rho = RECURSION_GAIN[(gene.recursion.clamp(1, 4) - 1) as usize];
    type_weight(gene.btype)
        * (gene.layers as f64 / 8.0)
        * (gene.growth as f64 / 64.0).sqrt()
        * rho
        * DEPTH_DECAY.powi(depth as i32)
}

#[derive(Debug, Clone)]
pub struct SurrogateEvaluator {
    /// Set to false to zero the pseudo-noise term.
    pub noise: bool,
}

impl Default for SurrogateEvaluator {
    fn default() -> Self {
        SurrogateEvaluator { noise: true }
    }
}

impl SurrogateEvaluator {
    pub fn without_noise() -> Self {
        SurrogateEvaluator { noise: false }
    }

    /// Prefix fitness including the leading floor entry.
    pub fn prefix_fitness(&self, genome: &Genome, seed: u64) -> Vec<f64> {
        let text = genome.encode_text();
        let mut out = vec![SURROGATE_FLOOR];
        let mut total = 0.0;
        for (k, (d, gene)) in genome.blocks.iter().enumerate().filter(|(_, b)| b.active).enumerate() {
            let mut q = base_quality(gene, d);
            if self.noise {
                q += NOISE_AMPLITUDE * noise_unit(&text, d, seed);
            }
            total += q / (1.0 + DIMINISHING * (k + 1) as f64);
            out.push(SURROGATE_FLOOR + total);
        }
        out
    }

    pub fn evaluate(&self, id: &str, genome: &Genome, seed: u64) -> EvalResponse {
        if let Err(v) = genome.validate() {
            let msg: Vec<String> = v.iter().map(|x| x.to_string()).collect();
            return EvalResponse::error(id, msg.join("; "));
        }
        EvalResponse::ok(id, self.prefix_fitness(genome, seed))
    }
}

impl Evaluator for SurrogateEvaluator {
    fn evaluate_batch(&mut self, requests: &[EvalRequest]) -> Result<Vec<EvalResponse>, EvalError> {
        Ok(requests.iter().map(|r| self.evaluate(&r.id, &r.genome, r.seed)).collect())
    }
}
