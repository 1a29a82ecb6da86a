use std::io::{Read, Write};

use nalgebra::DMatrix;

use super::hankel::{build_hankel, numerical_rank, SignalSeries};
use crate::error::{Error, Result};

/// Past/future partitions of the input, disturbance and output Hankel
/// matrices, all with the same column count.
#[derive(Debug, Clone)]
pub struct HankelSet {
    pub up: DMatrix<f64>,
    pub uf: DMatrix<f64>,
    pub wp: DMatrix<f64>,
    pub wf: DMatrix<f64>,
    pub yp: DMatrix<f64>,
    pub yf: DMatrix<f64>,
    pub m: usize,
    pub q: usize,
    pub p: usize,
    pub t_ini: usize,
    pub horizon: usize,
    pub t_d: usize,
    /// Outcome of the excitation check on the stacked (u, w) data.
    pub persistently_exciting: bool,
}

impl HankelSet {
    pub fn columns(&self) -> usize {
        self.up.ncols()
    }
}

/// Builds the six Hankel blocks of depth `t_ini + horizon`.
///
/// The stacked input/disturbance series is checked for persistent
/// excitation of order `t_ini + horizon + n_assumed`; a deficiency is logged
/// and recorded but does not fail assembly. Pass `n_assumed = None` to skip
/// the check (it costs one SVD of the depth-`L` Hankel matrix).
pub fn assemble_hankel_set(
    u: &SignalSeries,
    w: &SignalSeries,
    y: &SignalSeries,
    t_ini: usize,
    horizon: usize,
    n_assumed: Option<usize>,
) -> Result<HankelSet> {
    let t_d = u.len();
    if w.len() != t_d || y.len() != t_d {
        return Err(Error::LengthMismatch(format!(
            "u, w, y lengths {}, {}, {}",
            u.len(),
            w.len(),
            y.len()
        )));
    }
    let depth = t_ini + horizon;
    if t_ini == 0 || horizon == 0 {
        return Err(Error::Config("initial window and horizon must be positive".into()));
    }
    if t_d < depth {
        return Err(Error::TooShort { len: t_d, needed: depth });
    }
    let (m, q, p) = (u.dim(), w.dim(), y.dim());
    let split = |h: DMatrix<f64>, dim: usize| {
        let past = h.rows(0, dim * t_ini).into_owned();
        let future = h.rows(dim * t_ini, dim * horizon).into_owned();
        (past, future)
    };
    let (up, uf) = split(build_hankel(u, depth)?, m);
    let (wp, wf) = split(build_hankel(w, depth)?, q);
    let (yp, yf) = split(build_hankel(y, depth)?, p);

    let persistently_exciting = match n_assumed {
        None => true,
        Some(n) => {
            let order = depth + n;
            let stacked = u.stack(w)?;
            if stacked.len() < order {
                log::warn!("data too short to be persistently exciting of order {order}");
                false
            } else {
                let h = build_hankel(&stacked, order)?;
                let rank = numerical_rank(&h);
                if rank < h.nrows() {
                    log::warn!(
                        "input/disturbance data not persistently exciting of order {order}: rank {rank} < {}",
                        h.nrows()
                    );
                    false
                } else {
                    true
                }
            }
        }
    };

    Ok(HankelSet {
        up,
        uf,
        wp,
        wf,
        yp,
        yf,
        m,
        q,
        p,
        t_ini,
        horizon,
        t_d,
        persistently_exciting,
    })
}

/// Input, disturbance and output trajectories recorded at the upper-layer
/// sampling rate.
#[derive(Debug, Clone, PartialEq)]
pub struct CollectedData {
    pub u: SignalSeries,
    pub w: SignalSeries,
    pub y: SignalSeries,
}

impl CollectedData {
    pub fn new(u: SignalSeries, w: SignalSeries, y: SignalSeries) -> Result<Self> {
        if w.len() != u.len() || y.len() != u.len() {
            return Err(Error::LengthMismatch(format!(
                "u, w, y lengths {}, {}, {}",
                u.len(),
                w.len(),
                y.len()
            )));
        }
        Ok(CollectedData { u, w, y })
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn hankels(&self, t_ini: usize, horizon: usize, n_assumed: Option<usize>) -> Result<HankelSet> {
        assemble_hankel_set(&self.u, &self.w, &self.y, t_ini, horizon, n_assumed)
    }

    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["k".to_string()];
        for (prefix, dim) in [("u", self.u.dim()), ("w", self.w.dim()), ("y", self.y.dim())] {
            header.extend((0..dim).map(|i| format!("{prefix}_{i}")));
        }
        w.write_record(&header)?;
        for k in 0..self.len() {
            let mut row = vec![k.to_string()];
            for s in [&self.u, &self.w, &self.y] {
                row.extend(s.as_matrix().column(k).iter().map(|v| v.to_string()));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(input: impl Read) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(input);
        let header = reader.headers()?.clone();
        let bad = |msg: String| Error::Config(format!("collected data: {msg}"));
        if header.get(0) != Some("k") {
            return Err(bad("first column must be k".into()));
        }
        let mut dims = [0usize; 3];
        let mut expect = 1;
        for (slot, prefix) in ["u", "w", "y"].iter().enumerate() {
            while header
                .get(expect)
                .is_some_and(|h| *h == format!("{prefix}_{}", dims[slot]))
            {
                dims[slot] += 1;
                expect += 1;
            }
            if dims[slot] == 0 {
                return Err(bad(format!("no {prefix}_ columns")));
            }
        }
        if expect != header.len() {
            return Err(bad(format!("unexpected column {:?}", header.get(expect))));
        }
        let mut columns: [Vec<Vec<f64>>; 3] = Default::default();
        for (row_no, rec) in reader.records().enumerate() {
            let rec = rec?;
            let k: usize = rec[0]
                .trim()
                .parse()
                .map_err(|_| bad(format!("row {row_no}: bad step index")))?;
            if k != row_no {
                return Err(bad(format!("row {row_no}: step index {k} out of order")));
            }
            let mut at = 1;
            for slot in 0..3 {
                let mut sample = Vec::with_capacity(dims[slot]);
                for _ in 0..dims[slot] {
                    let v: f64 = rec[at]
                        .trim()
                        .parse()
                        .map_err(|_| bad(format!("row {row_no}: bad number {:?}", &rec[at])))?;
                    sample.push(v);
                    at += 1;
                }
                columns[slot].push(sample);
            }
        }
        let [u, w, y] = columns;
        CollectedData::new(SignalSeries::new(&u)?, SignalSeries::new(&w)?, SignalSeries::new(&y)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(len: usize, dim: usize, offset: f64) -> SignalSeries {
        let samples: Vec<Vec<f64>> = (0..len)
            .map(|k| (0..dim).map(|i| offset + (k * dim + i) as f64).collect())
            .collect();
        SignalSeries::new(&samples).unwrap()
    }

    #[test]
    fn scalar_dimensions() {
        let s = ramp(12, 1, 0.0);
        let h = assemble_hankel_set(&s, &s, &s, 2, 2, None).unwrap();
        for m in [&h.up, &h.uf, &h.wp, &h.wf, &h.yp, &h.yf] {
            assert_eq!((m.nrows(), m.ncols()), (2, 9));
        }
        // the future block starts where the past block ends
        assert_eq!(h.uf[(0, 0)], 2.0);
    }

    #[test]
    fn paper_scale_dimensions() {
        let h = assemble_hankel_set(&ramp(3000, 25, 0.0), &ramp(3000, 10, 0.0), &ramp(3000, 5, 0.0), 35, 10, None)
            .unwrap();
        assert_eq!((h.up.nrows(), h.up.ncols()), (875, 2956));
        assert_eq!(h.uf.nrows(), 250);
        assert_eq!(h.wp.nrows(), 350);
        assert_eq!(h.yf.nrows(), 50);
    }

    #[test]
    fn mismatched_and_short() {
        let a = ramp(10, 1, 0.0);
        let b = ramp(9, 1, 0.0);
        assert!(matches!(assemble_hankel_set(&a, &b, &a, 2, 2, None), Err(Error::LengthMismatch(_))));
        assert!(matches!(assemble_hankel_set(&a, &a, &a, 6, 5, None), Err(Error::TooShort { .. })));
    }

    #[test]
    fn rank_deficient_data_warns_but_assembles() {
        let c = SignalSeries::new(&vec![vec![1.0]; 30]).unwrap();
        let h = assemble_hankel_set(&c, &c, &c, 2, 2, Some(1)).unwrap();
        assert!(!h.persistently_exciting);
    }

    #[test]
    fn csv_round_trip() {
        let d = CollectedData::new(ramp(4, 4, 0.5), ramp(4, 4, 1.0), ramp(4, 2, 2.0)).unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("k,u_0,u_1,u_2,u_3,w_0,w_1,w_2,w_3,y_0,y_1\n"));
        assert_eq!(CollectedData::read_csv(buf.as_slice()).unwrap(), d);
    }

    #[test]
    fn csv_rejects_bad_header() {
        let text = "k,u_0,y_0\n0,1,2\n";
        assert!(CollectedData::read_csv(text.as_bytes()).is_err());
    }
}
