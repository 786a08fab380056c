//! Forward pass, losses and exact backpropagation.
//!
//! Pre-norm blocks: `x + Attn(LN1(x))`, then `x + FFN(LN2(x))`, with no
//! final normalization, so a block whose attention and feed-forward weights
//! are all zero passes its input through unchanged.

use super::ops::{self, add_assign, add_bias, matmul, matmul_a_bt, matmul_at_b_acc, sum_rows_acc};
use super::{HiddenStates, LayerOffsets, ModelError, ModelParams, Scalar, TokenDistributions};

struct LayerCache<T> {
    x_in: Vec<T>,
    a: Vec<T>,
    xhat1: Vec<T>,
    rstd1: Vec<T>,
    q: Vec<T>,
    k: Vec<T>,
    v: Vec<T>,
    /// heads × n × n attention weights.
    probs: Vec<T>,
    o: Vec<T>,
    c: Vec<T>,
    xhat2: Vec<T>,
    rstd2: Vec<T>,
    u: Vec<T>,
    z: Vec<T>,
}

struct ForwardCache<T> {
    ids: Vec<usize>,
    layers: Vec<LayerCache<T>>,
    hidden: Vec<T>,
}

fn check_ids<T: Scalar>(p: &ModelParams<T>, ids: &[usize]) -> Result<Vec<usize>, ModelError> {
    if ids.is_empty() {
        return Err(ModelError::EmptyInput);
    }
    let size = p.config.vocab_size;
    if let Some(&id) = ids.iter().find(|&&id| id >= size) {
        return Err(ModelError::TokenOutOfRange { id, size });
    }
    let max = p.config.max_len;
    if ids.len() > max {
        log::warn!("input of {} tokens truncated to {max}", ids.len());
        return Ok(ids[..max].to_vec());
    }
    Ok(ids.to_vec())
}

fn layer_forward<T: Scalar>(p: &ModelParams<T>, lo: &LayerOffsets, x: Vec<T>, n: usize) -> (Vec<T>, LayerCache<T>) {
    let cfg = &p.config;
    let (d, f, heads, dh) = (cfg.d_model, cfg.d_ff, cfg.n_heads, cfg.head_dim());
    let scale = T::c(1.0 / (dh as f64).sqrt());

    let (a, xhat1, rstd1) = ops::layer_norm(&x, p.at(lo.ln1_g, d), p.at(lo.ln1_b, d));
    let proj = |w: usize, b: usize| {
        let mut y = matmul(&a, p.at(w, d * d), n, d, d);
        add_bias(&mut y, p.at(b, d));
        y
    };
    let q = proj(lo.wq, lo.bq);
    let k = proj(lo.wk, lo.bk);
    let v = proj(lo.wv, lo.bv);

    let mut probs = vec![T::zero(); heads * n * n];
    let mut o = vec![T::zero(); n * d];
    for h in 0..heads {
        let hc = h * dh;
        let pm = &mut probs[h * n * n..(h + 1) * n * n];
        for i in 0..n {
            let qi = &q[i * d + hc..i * d + hc + dh];
            let row = &mut pm[i * n..(i + 1) * n];
            for j in 0..n {
                row[j] = ops::dot(qi, &k[j * d + hc..j * d + hc + dh]) * scale;
            }
            ops::softmax_in_place(row);
            let oi = &mut o[i * d + hc..i * d + hc + dh];
            for j in 0..n {
                let w = row[j];
                for (dst, &vv) in oi.iter_mut().zip(&v[j * d + hc..j * d + hc + dh]) {
                    *dst = *dst + w * vv;
                }
            }
        }
    }
    let mut attn = matmul(&o, p.at(lo.wo, d * d), n, d, d);
    add_bias(&mut attn, p.at(lo.bo, d));
    let mut x1 = x.clone();
    add_assign(&mut x1, &attn);

    let (c, xhat2, rstd2) = ops::layer_norm(&x1, p.at(lo.ln2_g, d), p.at(lo.ln2_b, d));
    let mut u = matmul(&c, p.at(lo.w1, d * f), n, d, f);
    add_bias(&mut u, p.at(lo.b1, f));
    let z: Vec<T> = u.iter().map(|&v| ops::gelu(v)).collect();
    let mut ffn = matmul(&z, p.at(lo.w2, f * d), n, f, d);
    add_bias(&mut ffn, p.at(lo.b2, d));
    let mut out = x1;
    add_assign(&mut out, &ffn);

    let cache = LayerCache {
        x_in: x,
        a,
        xhat1,
        rstd1,
        q,
        k,
        v,
        probs,
        o,
        c,
        xhat2,
        rstd2,
        u,
        z,
    };
    (out, cache)
}

fn run<T: Scalar>(p: &ModelParams<T>, ids: &[usize]) -> Result<ForwardCache<T>, ModelError> {
    let ids = check_ids(p, ids)?;
    let n = ids.len();
    let d = p.config.d_model;
    let lay = p.layout();
    let mut x = vec![T::zero(); n * d];
    for (i, &id) in ids.iter().enumerate() {
        let row = &mut x[i * d..(i + 1) * d];
        let e = p.at(lay.tok_emb + id * d, d);
        let pe = p.at(lay.pos_emb + i * d, d);
        for c in 0..d {
            row[c] = e[c] + pe[c];
        }
    }
    let mut layers = Vec::with_capacity(lay.layers.len());
    for lo in &lay.layers {
        let (next, cache) = layer_forward(p, lo, x, n);
        layers.push(cache);
        x = next;
    }
    Ok(ForwardCache {
        ids,
        layers,
        hidden: x,
    })
}

/// Contextual feature rows for a token-id sequence (sentinel included).
pub fn encode<T: Scalar>(p: &ModelParams<T>, ids: &[usize]) -> Result<HiddenStates<T>, ModelError> {
    let cache = run(p, ids)?;
    Ok(HiddenStates {
        rows: cache.ids.len(),
        dim: p.config.d_model,
        data: cache.hidden,
    })
}

fn head_logits<T: Scalar>(p: &ModelParams<T>, h: &[T], n: usize) -> (Vec<T>, Vec<T>) {
    let (d, c) = (p.config.d_model, p.config.num_labels);
    let lay = p.layout();
    let mut ged = matmul(h, p.at(lay.ged_w, d * 2), n, d, 2);
    add_bias(&mut ged, p.at(lay.ged_b, 2));
    let mut gel = matmul(h, p.at(lay.gel_w, d * c), n, d, c);
    add_bias(&mut gel, p.at(lay.gel_b, c));
    (ged, gel)
}

fn softmax_rows<T: Scalar>(x: &mut [T], width: usize) {
    for row in x.chunks_exact_mut(width) {
        ops::softmax_in_place(row);
    }
}

/// Detector and labeler distributions for every position.
pub fn forward<T: Scalar>(p: &ModelParams<T>, ids: &[usize]) -> Result<TokenDistributions<T>, ModelError> {
    let cache = run(p, ids)?;
    let n = cache.ids.len();
    let (mut ged, mut gel) = head_logits(p, &cache.hidden, n);
    softmax_rows(&mut ged, 2);
    softmax_rows(&mut gel, p.config.num_labels);
    Ok(TokenDistributions {
        rows: n,
        num_labels: p.config.num_labels,
        ged,
        gel,
    })
}

/// Scalar objective with its gradient.
#[derive(Debug, Clone)]
pub struct LossValue<T: Scalar> {
    /// `ged + gel_weight * gel`.
    pub total: T,
    /// Mean per-token cross-entropy of the detector.
    pub ged: T,
    /// Mean per-token cross-entropy of the labeler.
    pub gel: T,
    pub grads: ModelParams<T>,
}

fn layer_backward<T: Scalar>(
    p: &ModelParams<T>,
    lo: &LayerOffsets,
    cache: &LayerCache<T>,
    dout: Vec<T>,
    n: usize,
    g: &mut ModelParams<T>,
) -> Vec<T> {
    let cfg = &p.config;
    let (d, f, heads, dh) = (cfg.d_model, cfg.d_ff, cfg.n_heads, cfg.head_dim());
    let scale = T::c(1.0 / (dh as f64).sqrt());

    // Feed-forward branch.
    matmul_at_b_acc(&cache.z, &dout, n, f, d, g.at_mut(lo.w2, f * d));
    sum_rows_acc(&dout, g.at_mut(lo.b2, d));
    let dz = matmul_a_bt(&dout, p.at(lo.w2, f * d), n, d, f);
    let du: Vec<T> = dz
        .iter()
        .zip(&cache.u)
        .map(|(&dz, &u)| dz * ops::gelu_grad(u))
        .collect();
    matmul_at_b_acc(&cache.c, &du, n, d, f, g.at_mut(lo.w1, d * f));
    sum_rows_acc(&du, g.at_mut(lo.b1, f));
    let dc = matmul_a_bt(&du, p.at(lo.w1, d * f), n, f, d);
    let (mut dg, mut db) = (vec![T::zero(); d], vec![T::zero(); d]);
    let dx1_ln = ops::layer_norm_backward(&dc, &cache.xhat2, &cache.rstd2, p.at(lo.ln2_g, d), &mut dg, &mut db);
    add_assign(g.at_mut(lo.ln2_g, d), &dg);
    add_assign(g.at_mut(lo.ln2_b, d), &db);
    let mut dx1 = dout;
    add_assign(&mut dx1, &dx1_ln);

    // Attention branch.
    matmul_at_b_acc(&cache.o, &dx1, n, d, d, g.at_mut(lo.wo, d * d));
    sum_rows_acc(&dx1, g.at_mut(lo.bo, d));
    let d_o = matmul_a_bt(&dx1, p.at(lo.wo, d * d), n, d, d);
    let mut dq = vec![T::zero(); n * d];
    let mut dk = vec![T::zero(); n * d];
    let mut dv = vec![T::zero(); n * d];
    let mut dp = vec![T::zero(); n];
    for h in 0..heads {
        let hc = h * dh;
        let pm = &cache.probs[h * n * n..(h + 1) * n * n];
        for i in 0..n {
            let doi = &d_o[i * d + hc..i * d + hc + dh];
            let prow = &pm[i * n..(i + 1) * n];
            let mut weighted = T::zero();
            for j in 0..n {
                dp[j] = ops::dot(doi, &cache.v[j * d + hc..j * d + hc + dh]);
                weighted = weighted + prow[j] * dp[j];
                let w = prow[j];
                for (dst, &g_o) in dv[j * d + hc..j * d + hc + dh].iter_mut().zip(doi) {
                    *dst = *dst + w * g_o;
                }
            }
            for j in 0..n {
                let ds = prow[j] * (dp[j] - weighted) * scale;
                if ds == T::zero() {
                    continue;
                }
                for c in 0..dh {
                    dq[i * d + hc + c] = dq[i * d + hc + c] + ds * cache.k[j * d + hc + c];
                    dk[j * d + hc + c] = dk[j * d + hc + c] + ds * cache.q[i * d + hc + c];
                }
            }
        }
    }
    let mut da = vec![T::zero(); n * d];
    for (dy, w, b) in [(&dq, lo.wq, lo.bq), (&dk, lo.wk, lo.bk), (&dv, lo.wv, lo.bv)] {
        matmul_at_b_acc(&cache.a, dy, n, d, d, g.at_mut(w, d * d));
        sum_rows_acc(dy, g.at_mut(b, d));
        add_assign(&mut da, &matmul_a_bt(dy, p.at(w, d * d), n, d, d));
    }
    let (mut dg, mut db) = (vec![T::zero(); d], vec![T::zero(); d]);
    let dx_ln = ops::layer_norm_backward(&da, &cache.xhat1, &cache.rstd1, p.at(lo.ln1_g, d), &mut dg, &mut db);
    add_assign(g.at_mut(lo.ln1_g, d), &dg);
    add_assign(g.at_mut(lo.ln1_b, d), &db);
    debug_assert_eq!(cache.x_in.len(), n * d);
    let mut dx = dx1;
    add_assign(&mut dx, &dx_ln);
    dx
}

/// Mean per-token detector cross-entropy plus `gel_weight` times the mean
/// per-token labeler cross-entropy, with exact gradients.
///
/// `labels` and `error_bits` must have one entry per input id. Inputs longer
/// than `max_len` are truncated together with their targets.
pub fn loss<T: Scalar>(
    p: &ModelParams<T>,
    ids: &[usize],
    labels: &[usize],
    error_bits: &[u8],
) -> Result<LossValue<T>, ModelError> {
    for (what, got) in [("labels", labels.len()), ("detection targets", error_bits.len())] {
        if got != ids.len() {
            return Err(ModelError::LengthMismatch {
                what,
                expected: ids.len(),
                got,
            });
        }
    }
    let size = p.config.num_labels;
    if let Some(&id) = labels.iter().find(|&&id| id >= size) {
        return Err(ModelError::LabelOutOfRange { id, size });
    }
    let cache = run(p, ids)?;
    let n = cache.ids.len();
    let (d, c) = (p.config.d_model, p.config.num_labels);
    let lay = p.layout();
    let (mut ged, mut gel) = head_logits(p, &cache.hidden, n);
    softmax_rows(&mut ged, 2);
    softmax_rows(&mut gel, c);

    let inv_n = T::c(1.0 / n as f64);
    let w_gel = T::c(p.config.gel_weight);
    let tiny = T::min_positive_value();
    let mut ged_loss = T::zero();
    let mut gel_loss = T::zero();
    // Softmax-CE gradient: (probs - onehot) / n, scaled per head.
    let mut dged = ged;
    let mut dgel = gel;
    for i in 0..n {
        let yb = usize::from(error_bits[i] != 0);
        ged_loss = ged_loss - dged[i * 2 + yb].max(tiny).ln();
        dged[i * 2 + yb] = dged[i * 2 + yb] - T::one();
        let yl = labels[i];
        gel_loss = gel_loss - dgel[i * c + yl].max(tiny).ln();
        dgel[i * c + yl] = dgel[i * c + yl] - T::one();
    }
    ged_loss = ged_loss * inv_n;
    gel_loss = gel_loss * inv_n;
    dged.iter_mut().for_each(|v| *v = *v * inv_n);
    dgel.iter_mut().for_each(|v| *v = *v * inv_n * w_gel);

    let mut g = p.zeros_like();
    matmul_at_b_acc(&cache.hidden, &dged, n, d, 2, g.at_mut(lay.ged_w, d * 2));
    sum_rows_acc(&dged, g.at_mut(lay.ged_b, 2));
    matmul_at_b_acc(&cache.hidden, &dgel, n, d, c, g.at_mut(lay.gel_w, d * c));
    sum_rows_acc(&dgel, g.at_mut(lay.gel_b, c));
    let mut dx = matmul_a_bt(&dged, p.at(lay.ged_w, d * 2), n, 2, d);
    add_assign(&mut dx, &matmul_a_bt(&dgel, p.at(lay.gel_w, d * c), n, c, d));

    for (lo, lc) in lay.layers.iter().zip(&cache.layers).rev() {
        dx = layer_backward(p, lo, lc, dx, n, &mut g);
    }
    for (i, &id) in cache.ids.iter().enumerate() {
        let row = &dx[i * d..(i + 1) * d];
        add_assign(g.at_mut(lay.tok_emb + id * d, d), row);
        add_assign(g.at_mut(lay.pos_emb + i * d, d), row);
    }

    Ok(LossValue {
        total: ged_loss + w_gel * gel_loss,
        ged: ged_loss,
        gel: gel_loss,
        grads: g,
    })
}

#[cfg(test)]
mod tests {
    use super::super::ModelConfig;
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tiny() -> ModelConfig {
        ModelConfig {
            d_model: 8,
            n_heads: 2,
            n_layers: 2,
            d_ff: 12,
            max_len: 8,
            ..ModelConfig::new(12, 6)
        }
    }

    fn zero_blocks<T: Scalar>(p: &mut ModelParams<T>) {
        let names: Vec<String> = p
            .layout()
            .specs
            .iter()
            .filter(|s| s.name.contains(".attn.") || s.name.contains(".ffn."))
            .map(|s| s.name.clone())
            .collect();
        for n in names {
            p.tensor_mut(&n).unwrap().fill(T::zero());
        }
    }

    #[test]
    fn zeroed_blocks_pass_embeddings_through() {
        let mut p = ModelParams::<f64>::init(tiny(), 3).unwrap();
        zero_blocks(&mut p);
        let ids = [0, 4, 7, 2];
        let h = encode(&p, &ids).unwrap();
        let d = p.config.d_model;
        for (i, &id) in ids.iter().enumerate() {
            let e = &p.tensor("tok_emb").unwrap()[id * d..(id + 1) * d];
            let pe = &p.tensor("pos_emb").unwrap()[i * d..(i + 1) * d];
            for c in 0..d {
                assert_eq!(h.row(i)[c], e[c] + pe[c]);
            }
        }
    }

    #[test]
    fn permuting_tokens_changes_rows() {
        let p = ModelParams::<f32>::init(tiny(), 5).unwrap();
        let a = encode(&p, &[0, 3, 9, 4]).unwrap();
        let b = encode(&p, &[0, 9, 3, 4]).unwrap();
        assert_ne!(a.row(1), b.row(1));
        assert_ne!(a.row(2), b.row(2));
    }

    #[test]
    fn sentinel_only_input() {
        let p = ModelParams::<f32>::init(tiny(), 5).unwrap();
        assert_eq!(encode(&p, &[0]).unwrap().rows, 1);
        assert_eq!(encode(&p, &[]), Err(ModelError::EmptyInput));
    }

    #[test]
    fn zero_heads_give_uniform_rows() {
        let mut p = ModelParams::<f32>::init(tiny(), 5).unwrap();
        for n in ["ged.w", "ged.b", "gel.w", "gel.b"] {
            p.tensor_mut(n).unwrap().fill(0.0);
        }
        let dist = forward(&p, &[0, 1, 2]).unwrap();
        for i in 0..3 {
            assert_eq!(dist.ged_row(i), &[0.5, 0.5]);
            for &v in dist.gel_row(i) {
                assert!((v - 1.0 / 6.0).abs() < 1e-7);
            }
        }
        let l = loss(&p, &[0, 1, 2], &[0, 3, 5], &[0, 1, 1]).unwrap();
        assert!((l.gel - 6f32.ln()).abs() < 1e-6);
        assert!((l.ged - 2f32.ln()).abs() < 1e-6);
    }

    #[test]
    fn rows_are_distributions_and_bonus_dominates() {
        let mut p = ModelParams::<f32>::init(tiny(), 11).unwrap();
        let dist = forward(&p, &[0, 5, 6, 7, 8]).unwrap();
        for i in 0..dist.rows {
            assert!((dist.ged_row(i).iter().sum::<f32>() - 1.0).abs() < 1e-6);
            assert!((dist.gel_row(i).iter().sum::<f32>() - 1.0).abs() < 1e-6);
            assert!(dist.gel_row(i).iter().all(|&v| v >= 0.0));
        }
        p.tensor_mut("gel.b").unwrap()[4] += 10.0;
        let dist = forward(&p, &[0, 5, 6, 7, 8]).unwrap();
        for i in 0..dist.rows {
            let row = dist.gel_row(i);
            let best = (0..row.len()).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
            assert_eq!(best, 4);
        }
    }

    #[test]
    fn loss_errors_and_truncation() {
        let p = ModelParams::<f32>::init(tiny(), 1).unwrap();
        assert!(matches!(
            loss(&p, &[0, 1], &[0, 6], &[0, 0]),
            Err(ModelError::LabelOutOfRange { id: 6, size: 6 })
        ));
        assert!(matches!(loss(&p, &[0, 1], &[0], &[0, 0]), Err(ModelError::LengthMismatch { .. })));
        assert!(matches!(forward(&p, &[0, 12]), Err(ModelError::TokenOutOfRange { .. })));
        let long: Vec<usize> = (0..20).map(|i| i % 12).collect();
        assert_eq!(forward(&p, &long).unwrap().rows, 8);
        assert!(loss(&p, &long, &[0; 20], &[0; 20]).is_ok());
    }

    /// Central differences on the f64 path.
    fn max_rel_error(seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = ModelParams::<f64>::init(tiny(), seed).unwrap();
        let ids: Vec<usize> = std::iter::once(0).chain((0..4).map(|_| rng.gen_range(1..12))).collect();
        let labels: Vec<usize> = (0..5).map(|_| rng.gen_range(0..6)).collect();
        let bits: Vec<u8> = labels.iter().map(|&l| u8::from(l != 0)).collect();
        let analytic = loss(&p, &ids, &labels, &bits).unwrap().grads;
        let h = 1e-4;
        let mut worst: f64 = 0.0;
        let mut q = p.clone();
        for k in 0..p.len() {
            let orig = q.as_slice()[k];
            q.as_mut_slice()[k] = orig + h;
            let up = loss(&q, &ids, &labels, &bits).unwrap().total;
            q.as_mut_slice()[k] = orig - h;
            let down = loss(&q, &ids, &labels, &bits).unwrap().total;
            q.as_mut_slice()[k] = orig;
            let num = (up - down) / (2.0 * h);
            let a = analytic.as_slice()[k];
            let rel = (a - num).abs() / a.abs().max(num.abs()).max(1e-6);
            worst = worst.max(rel);
        }
        worst
    }

    #[test]
    fn gradients_match_finite_differences() {
        for seed in 0..3 {
            let err = max_rel_error(seed);
            assert!(err < 1e-3, "seed {seed}: max relative error {err}");
        }
    }
}
