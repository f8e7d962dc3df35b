//! Model-facing representations of spike trains: binned binary matrices
//! for the GLM, (neuron, interspike-interval) token sequences for the
//! transformer, and chronological train/test splits.
//!
//! Interval arithmetic runs on a whole-microsecond grid so that
//! tokenize/detokenize is an exact bijection for any train whose times
//! sit on that grid (the simulator guarantees this).

use crate::error::{CoreError, Result};
use crate::sim::{SpikeEvent, SpikeTrain};
use ndarray::Array2;

/// Binary spike matrix, `y[[t, i]] = 1` iff neuron `i` spiked in
/// `[t * bin_ms, (t + 1) * bin_ms)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedSpikes {
    pub y: Array2<u8>,
    pub bin_ms: f64,
    pub n: usize,
}

impl BinnedSpikes {
    pub fn t_bins(&self) -> usize {
        self.y.nrows()
    }

    /// Number of set bins per neuron (column sums).
    pub fn bin_counts(&self) -> Vec<usize> {
        (0..self.n)
            .map(|i| self.y.column(i).iter().filter(|&&v| v == 1).count())
            .collect()
    }
}

/// Bin a spike train into a binary matrix with half-open bins.
pub fn bin_spikes(train: &SpikeTrain, bin_ms: f64) -> Result<BinnedSpikes> {
    if !(bin_ms > 0.0) || !bin_ms.is_finite() {
        return Err(CoreError::InvalidParameter(format!(
            "bin_ms must be > 0, got {bin_ms}"
        )));
    }
    if train.duration_ms <= 0.0 {
        return Err(CoreError::EmptyInput(
            "cannot bin a zero-duration train".into(),
        ));
    }
    let t_bins = (train.duration_ms / bin_ms).ceil() as usize;
    let mut y = Array2::<u8>::zeros((t_bins, train.n));
    for ev in &train.events {
        let mut bin = (ev.time_ms / bin_ms).floor() as usize;
        if bin >= t_bins {
            bin = t_bins - 1;
        }
        y[[bin, ev.neuron]] = 1;
    }
    Ok(BinnedSpikes {
        y,
        bin_ms,
        n: train.n,
    })
}

/// One event token: neuron identity and the interval to the previous
/// event across the whole population. The first token's interval is 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Token {
    pub neuron: usize,
    pub dt_ms: f64,
}

/// Ordered token sequence derived from one spike train.
///
/// `t0_ms` is the absolute time of the first event; the first token's
/// interval is 0 by convention, so the anchor is kept here to make
/// detokenization exact.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenSequence {
    pub tokens: Vec<Token>,
    pub n: usize,
    pub t0_ms: f64,
}

fn to_us(time_ms: f64) -> i64 {
    (time_ms * 1000.0).round() as i64
}

fn from_us(us: i64) -> f64 {
    us as f64 / 1000.0
}

/// Map each event to (neuron id, interval to previous event).
pub fn tokenize(train: &SpikeTrain) -> TokenSequence {
    let mut tokens = Vec::with_capacity(train.events.len());
    let mut prev_us: Option<i64> = None;
    for ev in &train.events {
        let us = to_us(ev.time_ms);
        let dt_ms = match prev_us {
            None => 0.0,
            Some(p) => from_us(us - p),
        };
        tokens.push(Token {
            neuron: ev.neuron,
            dt_ms,
        });
        prev_us = Some(us);
    }
    TokenSequence {
        tokens,
        n: train.n,
        t0_ms: train.events.first().map_or(0.0, |ev| ev.time_ms),
    }
}

/// Reconstruct the source train from its tokens. Exact inverse of
/// [`tokenize`] for trains on the microsecond grid.
pub fn detokenize(seq: &TokenSequence, duration_ms: f64) -> Result<SpikeTrain> {
    let mut events = Vec::with_capacity(seq.tokens.len());
    let mut cum_us: i64 = to_us(seq.t0_ms);
    for (k, tok) in seq.tokens.iter().enumerate() {
        let dt_us = to_us(tok.dt_ms);
        if dt_us < 0 {
            return Err(CoreError::InvalidParameter(format!(
                "token {k} has negative interval {}",
                tok.dt_ms
            )));
        }
        if k > 0 {
            cum_us += dt_us;
        }
        events.push(SpikeEvent {
            time_ms: from_us(cum_us),
            neuron: tok.neuron,
        });
    }
    SpikeTrain::new(events, duration_ms, seq.n)
}

/// Chronological split of a spike train at `fraction` of its duration.
#[derive(Debug, Clone)]
pub struct SpikeTrainSplit {
    pub train: SpikeTrain,
    pub test: SpikeTrain,
    pub fraction: f64,
    /// Absolute cut time in ms; train events satisfy `t < cut_ms`.
    pub cut_ms: f64,
}

/// Split events at the time quantile `fraction * duration`. Events with
/// `time < cut` go to the training part. Times are preserved as-is.
pub fn chronological_split(train: &SpikeTrain, fraction: f64) -> Result<SpikeTrainSplit> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(CoreError::InvalidParameter(format!(
            "split fraction must be in (0, 1), got {fraction}"
        )));
    }
    let cut_ms = train.duration_ms * fraction;
    let cut_idx = train.events.partition_point(|ev| ev.time_ms < cut_ms);
    if cut_idx == 0 || cut_idx == train.events.len() {
        return Err(CoreError::EmptyInput(format!(
            "split at fraction {fraction} leaves an empty part ({} of {} events before cut)",
            cut_idx,
            train.events.len()
        )));
    }
    let head = SpikeTrain::new(train.events[..cut_idx].to_vec(), cut_ms, train.n)?;
    let tail = SpikeTrain::new(train.events[cut_idx..].to_vec(), train.duration_ms, train.n)?;
    Ok(SpikeTrainSplit {
        train: head,
        test: tail,
        fraction,
        cut_ms,
    })
}

/// Chronological split of a token sequence by reconstructed event time.
#[derive(Debug, Clone)]
pub struct TokenSplit {
    pub train: TokenSequence,
    pub test: TokenSequence,
    pub fraction: f64,
}

/// Split tokens at the cumulative-time quantile of `duration_ms`. The
/// boundary token keeps its interval to the last training token.
pub fn chronological_split_tokens(
    seq: &TokenSequence,
    duration_ms: f64,
    fraction: f64,
) -> Result<TokenSplit> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(CoreError::InvalidParameter(format!(
            "split fraction must be in (0, 1), got {fraction}"
        )));
    }
    let cut_us = to_us(duration_ms * fraction);
    let mut cum_us: i64 = to_us(seq.t0_ms);
    let mut cut_idx = seq.tokens.len();
    for (k, tok) in seq.tokens.iter().enumerate() {
        if k > 0 {
            cum_us += to_us(tok.dt_ms);
        }
        if cum_us >= cut_us {
            cut_idx = k;
            break;
        }
    }
    if cut_idx == 0 || cut_idx >= seq.tokens.len() {
        return Err(CoreError::EmptyInput(format!(
            "token split at fraction {fraction} leaves an empty part"
        )));
    }
    let test_t0 = from_us(cum_us);
    Ok(TokenSplit {
        train: TokenSequence {
            tokens: seq.tokens[..cut_idx].to_vec(),
            n: seq.n,
            t0_ms: seq.t0_ms,
        },
        test: TokenSequence {
            tokens: seq.tokens[cut_idx..].to_vec(),
            n: seq.n,
            t0_ms: test_t0,
        },
        fraction,
    })
}

/// Fixed-length, non-overlapping training windows. The trailing
/// remainder shorter than `window` tokens is dropped.
pub fn windows(seq: &TokenSequence, window: usize) -> Result<Vec<TokenSequence>> {
    if window < 2 {
        return Err(CoreError::InvalidParameter(format!(
            "window length must be >= 2, got {window}"
        )));
    }
    Ok(seq
        .tokens
        .chunks_exact(window)
        .map(|chunk| TokenSequence {
            tokens: chunk.to_vec(),
            n: seq.n,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn train_of(events: &[(f64, usize)], duration: f64, n: usize) -> SpikeTrain {
        SpikeTrain::new(
            events
                .iter()
                .map(|&(time_ms, neuron)| SpikeEvent { time_ms, neuron })
                .collect(),
            duration,
            n,
        )
        .unwrap()
    }

    #[test]
    fn empty_train_bins_to_zero_matrix() {
        let train = train_of(&[], 10.0, 4);
        let b = bin_spikes(&train, 1.0).unwrap();
        assert_eq!(b.y.shape(), &[10, 4]);
        assert!(b.y.iter().all(|&v| v == 0));
    }

    #[test]
    fn single_event_lands_in_floor_bin() {
        // floor(2.5 / 1.0) = 2
        let train = train_of(&[(2.5, 0)], 10.0, 2);
        let b = bin_spikes(&train, 1.0).unwrap();
        assert_eq!(b.y[[2, 0]], 1);
        assert_eq!(b.y.iter().map(|&v| v as usize).sum::<usize>(), 1);
    }

    #[test]
    fn same_bin_events_binarize() {
        let train = train_of(&[(3.1, 1), (3.9, 1)], 10.0, 2);
        let b = bin_spikes(&train, 1.0).unwrap();
        assert_eq!(b.y[[3, 1]], 1);
        assert_eq!(b.y.iter().map(|&v| v as usize).sum::<usize>(), 1);
    }

    #[test]
    fn bin_counts_equal_event_counts_when_refractory_exceeds_bin() {
        // gaps >= 2 ms, bins of 1 ms: one bin per event
        let train = train_of(&[(0.5, 0), (2.6, 0), (5.0, 0), (7.3, 0)], 10.0, 1);
        let b = bin_spikes(&train, 1.0).unwrap();
        assert_eq!(b.bin_counts()[0], 4);
    }

    #[test]
    fn zero_duration_rejected() {
        let train = train_of(&[], 0.0, 1);
        assert!(bin_spikes(&train, 1.0).is_err());
    }

    #[test]
    fn tokenize_takes_global_differences() {
        let train = train_of(&[(1.0, 3), (4.0, 7)], 10.0, 8);
        let seq = tokenize(&train);
        assert_eq!(
            seq.tokens,
            vec![
                Token {
                    neuron: 3,
                    dt_ms: 0.0
                },
                Token {
                    neuron: 7,
                    dt_ms: 3.0
                },
            ]
        );
    }

    #[test]
    fn single_event_token_has_zero_interval() {
        let train = train_of(&[(5.25, 0)], 10.0, 1);
        let seq = tokenize(&train);
        assert_eq!(seq.tokens.len(), 1);
        assert_eq!(seq.tokens[0].dt_ms, 0.0);
    }

    #[test]
    fn round_trip_is_exact_when_first_event_at_zero() {
        let train = train_of(&[(0.0, 2), (0.3, 0), (0.3, 1), (7.7, 2), (9.9, 0)], 10.0, 3);
        let seq = tokenize(&train);
        let back = detokenize(&seq, train.duration_ms).unwrap();
        assert_eq!(train.events.len(), back.events.len());
        for (a, b) in train.events.iter().zip(&back.events) {
            assert_eq!(a.time_ms.to_bits(), b.time_ms.to_bits());
            assert_eq!(a.neuron, b.neuron);
        }
    }

    #[test]
    fn split_counts_events_before_quantile() {
        let events: Vec<(f64, usize)> = (0..10).map(|k| (k as f64, 0)).collect();
        let train = train_of(&events, 10.0, 1);
        let split = chronological_split(&train, 0.8).unwrap();
        assert_eq!(split.train.events.len(), 8);
        assert_eq!(split.test.events.len(), 2);
    }

    #[test]
    fn split_halves_symmetric_data() {
        let events: Vec<(f64, usize)> = (0..8).map(|k| (k as f64 + 0.5, 0)).collect();
        let train = train_of(&events, 8.0, 1);
        let split = chronological_split(&train, 0.5).unwrap();
        assert_eq!(split.train.events.len(), split.test.events.len());
    }

    #[test]
    fn split_is_chronological_and_exhaustive() {
        let events: Vec<(f64, usize)> = (0..20).map(|k| ((k * 7 % 97) as f64, k % 3)).collect();
        let mut sorted = events.clone();
        sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let train = train_of(&sorted, 100.0, 3);
        let split = chronological_split(&train, 0.6).unwrap();
        let max_train = split.train.events.last().unwrap().time_ms;
        let min_test = split.test.events.first().unwrap().time_ms;
        assert!(max_train < min_test || (max_train == min_test));
        assert!(max_train < split.cut_ms && min_test >= split.cut_ms);
        assert_eq!(
            split.train.events.len() + split.test.events.len(),
            train.events.len()
        );
    }

    #[test]
    fn degenerate_split_rejected() {
        let train = train_of(&[(9.0, 0), (9.5, 0)], 10.0, 1);
        // all events after the cut
        assert!(chronological_split(&train, 0.5).is_err());
        assert!(chronological_split(&train, 0.0).is_err());
        assert!(chronological_split(&train, 1.0).is_err());
    }

    #[test]
    fn token_split_respects_cumulative_time() {
        let train = train_of(&[(1.0, 0), (2.0, 1), (3.0, 0), (4.0, 1)], 5.0, 2);
        let seq = tokenize(&train);
        let split = chronological_split_tokens(&seq, 5.0, 0.5).unwrap();
        // cumulative times are 1, 2, 3, 4; cut at 2.5 -> first token with cum >= 2.5 is index 2
        assert_eq!(split.train.tokens.len(), 2);
        assert_eq!(split.test.tokens.len(), 2);
    }

    #[test]
    fn windows_are_non_overlapping_and_drop_tail() {
        let tokens: Vec<Token> = (0..10)
            .map(|k| Token {
                neuron: k % 3,
                dt_ms: 1.0,
            })
            .collect();
        let seq = TokenSequence { tokens, n: 3 };
        let ws = windows(&seq, 4).unwrap();
        assert_eq!(ws.len(), 2);
        assert_eq!(ws[0].tokens[0].neuron, 0);
        assert_eq!(ws[1].tokens[0].neuron, 1); // token index 4
        assert!(ws.iter().all(|w| w.tokens.len() == 4));
    }
}
