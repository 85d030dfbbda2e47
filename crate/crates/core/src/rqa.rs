//! Line-length histograms and the twelve recurrence quantification measures.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::recurrence::RecurrencePlot;

/// Shortest diagonal line counted by DET, L_avg, ENTR_d.
pub const MIN_DIAGONAL: usize = 2;
/// Shortest vertical line counted by LAM, TT, ENTR_v.
pub const MIN_VERTICAL: usize = 2;
/// Shortest white vertical line counted.
pub const MIN_WHITE: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineKind {
    Diagonal,
    Vertical,
    WhiteVertical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RqaOptions {
    /// Leave the main diagonal out of the diagonal-line histogram.
    pub exclude_loi: bool,
}

/// Number of maximal lines of each length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineHistogram {
    kind: LineKind,
    min_len: usize,
    // index = line length
    counts: Vec<u64>,
}

impl LineHistogram {
    fn new(kind: LineKind, size: usize) -> Self {
        let min_len = match kind {
            LineKind::Diagonal => MIN_DIAGONAL,
            LineKind::Vertical => MIN_VERTICAL,
            LineKind::WhiteVertical => MIN_WHITE,
        };
        LineHistogram {
            kind,
            min_len,
            counts: vec![0; size + 1],
        }
    }

    pub fn kind(&self) -> LineKind {
        self.kind
    }

    pub fn min_len(&self) -> usize {
        self.min_len
    }

    pub fn count(&self, len: usize) -> u64 {
        self.counts.get(len).copied().unwrap_or(0)
    }

    /// Non-zero entries keyed by length.
    pub fn to_map(&self) -> BTreeMap<usize, u64> {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(l, &c)| (l, c))
            .collect()
    }

    /// Sum of `l * P(l)` over all `l >= from`.
    pub fn points_from(&self, from: usize) -> u64 {
        self.counts
            .iter()
            .enumerate()
            .skip(from)
            .map(|(l, &c)| l as u64 * c)
            .sum()
    }

    /// Number of lines at least `from` long.
    pub fn lines_from(&self, from: usize) -> u64 {
        self.counts.iter().skip(from).sum()
    }

    /// Longest line at least `min_len` long, or 0.
    pub fn max_len(&self) -> usize {
        (self.min_len..self.counts.len())
            .rev()
            .find(|&l| self.counts[l] > 0)
            .unwrap_or(0)
    }

    /// `sum_l p(l) ln(1/p(l))` over lines at least `min_len` long.
    pub fn entropy(&self) -> f64 {
        let total = self.lines_from(self.min_len) as f64;
        if total == 0.0 {
            return 0.0;
        }
        self.counts
            .iter()
            .skip(self.min_len)
            .filter(|&&c| c > 0)
            .map(|&c| {
                let c = c as f64;
                c / total * (total / c).ln()
            })
            .sum()
    }

    /// Mean length of lines at least `min_len` long, or 0.
    pub fn mean_len(&self) -> f64 {
        let lines = self.lines_from(self.min_len);
        if lines == 0 {
            return 0.0;
        }
        self.points_from(self.min_len) as f64 / lines as f64
    }

    /// Share of line points lying on lines at least `min_len` long, or 0.
    pub fn long_line_share(&self) -> f64 {
        let all = self.points_from(1);
        if all == 0 {
            return 0.0;
        }
        self.points_from(self.min_len) as f64 / all as f64
    }
}

/// Calls `f(value, length)` for every maximal run in the first `len` bits.
fn for_each_run(words: &[u64], len: usize, mut f: impl FnMut(bool, usize)) {
    if len == 0 {
        return;
    }
    let mut val = words[0] & 1 == 1;
    let mut pos = 0;
    let mut start = 0;
    while pos < len {
        let shift = pos & 63;
        let w = words[pos >> 6] >> shift;
        let x = if val { !w } else { w };
        let avail = 64 - shift;
        let step = (x.trailing_zeros() as usize).min(avail);
        pos += step;
        if pos >= len {
            break;
        }
        if step < avail {
            f(val, pos - start);
            start = pos;
            val = !val;
        }
    }
    f(val, len - start);
}

/// Maximal runs of ones along every diagonal, ones down every column, and
/// zeros down every column. Runs that touch the matrix border are counted.
pub fn line_histograms(
    rp: &RecurrencePlot,
    opts: &RqaOptions,
) -> (LineHistogram, LineHistogram, LineHistogram) {
    let n = rp.size();
    let bits = rp.bits();

    let mut diag = LineHistogram::new(LineKind::Diagonal, n);
    let first = if opts.exclude_loi { 1 } else { 0 };
    // regroup the upper triangle by diagonal: bit i of diagonal o is (i, i + o)
    let wpr = n.div_ceil(64);
    let mut by_diag = vec![0u64; n * wpr];
    for i in 0..n {
        let from = i + first;
        for (wi, &word) in bits.row_words(i).iter().enumerate().skip(from / 64) {
            let mut w = word;
            if wi == from / 64 {
                w &= !0u64 << (from % 64);
            }
            while w != 0 {
                let j = wi * 64 + w.trailing_zeros() as usize;
                by_diag[(j - i) * wpr + (i >> 6)] |= 1 << (i & 63);
                w &= w - 1;
            }
        }
    }
    for offset in first..n {
        // the plot is symmetric, so each off-main diagonal stands for two
        let weight = if offset == 0 { 1 } else { 2 };
        for_each_run(&by_diag[offset * wpr..(offset + 1) * wpr], n - offset, |on, run| {
            if on {
                diag.counts[run] += weight;
            }
        });
    }

    // columns equal rows by symmetry; walk rows for contiguous access
    let mut vert = LineHistogram::new(LineKind::Vertical, n);
    let mut white = LineHistogram::new(LineKind::WhiteVertical, n);
    for col in 0..n {
        for_each_run(bits.row_words(col), n, |on, run| {
            if on {
                vert.counts[run] += 1;
            } else {
                white.counts[run] += 1;
            }
        });
    }
    (diag, vert, white)
}

/// The twelve measures for one frame, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RqaVector {
    pub rr: f64,
    pub det: f64,
    pub l_max: f64,
    pub l_avg: f64,
    pub entr_d: f64,
    pub lam: f64,
    pub v_max: f64,
    pub tt: f64,
    pub entr_v: f64,
    pub w_max: f64,
    pub w_avg: f64,
    pub entr_w: f64,
}

impl RqaVector {
    pub const LEN: usize = 12;

    /// Short names in canonical order, used for feature columns.
    pub const NAMES: [&'static str; 12] = [
        "rr", "det", "l_max", "l_avg", "entr_d", "lam", "v_max", "tt", "entr_v", "w_max", "w_avg",
        "entr_w",
    ];

    pub fn to_array(&self) -> [f64; 12] {
        [
            self.rr,
            self.det,
            self.l_max,
            self.l_avg,
            self.entr_d,
            self.lam,
            self.v_max,
            self.tt,
            self.entr_v,
            self.w_max,
            self.w_avg,
            self.entr_w,
        ]
    }

    pub fn from_array(a: [f64; 12]) -> Self {
        RqaVector {
            rr: a[0],
            det: a[1],
            l_max: a[2],
            l_avg: a[3],
            entr_d: a[4],
            lam: a[5],
            v_max: a[6],
            tt: a[7],
            entr_v: a[8],
            w_max: a[9],
            w_avg: a[10],
            entr_w: a[11],
        }
    }

    /// Measures of the `size x size` all-ones plot a constant frame produces.
    pub fn constant_frame(size: usize, opts: &RqaOptions) -> Self {
        rqa_measures(&RecurrencePlot::all_ones(size), opts)
    }
}

pub fn measures_from_histograms(
    rp: &RecurrencePlot,
    diag: &LineHistogram,
    vert: &LineHistogram,
    white: &LineHistogram,
) -> RqaVector {
    RqaVector {
        rr: rp.recurrence_rate(),
        det: diag.long_line_share(),
        l_max: diag.max_len() as f64,
        l_avg: diag.mean_len(),
        entr_d: diag.entropy(),
        lam: vert.long_line_share(),
        v_max: vert.max_len() as f64,
        tt: vert.mean_len(),
        entr_v: vert.entropy(),
        w_max: white.max_len() as f64,
        w_avg: white.mean_len(),
        entr_w: white.entropy(),
    }
}

pub fn rqa_measures(rp: &RecurrencePlot, opts: &RqaOptions) -> RqaVector {
    let (d, v, w) = line_histograms(rp, opts);
    measures_from_histograms(rp, &d, &v, &w)
}
