// SPDX-License-Identifier: MIT OR Apache-2.0

//! Sample-time residuals and the lag-filtered bias update.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{GriddedSeries, LabEvent, Timestamp};

pub const DEFAULT_BIAS_ALPHA: f64 = 0.3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub event: LabEvent,
    pub y_hat_at_sample: f64,
    /// `y_hat_at_sample - event.value`
    pub r: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Residuals {
    pub residuals: Vec<Residual>,
    pub warnings: Vec<String>,
}

/// Evaluates the prediction at each accepted event's effective sample time.
pub fn compute_residuals(y_hat: &GriddedSeries, events: &[LabEvent]) -> Residuals {
    residuals_at(y_hat, events, LabEvent::effective_sample_time)
}

/// Same as [`compute_residuals`] but evaluated at an arbitrary instant per event.
pub fn residuals_at(
    y_hat: &GriddedSeries,
    events: &[LabEvent],
    when: impl Fn(&LabEvent) -> Timestamp,
) -> Residuals {
    let mut out = Residuals::default();
    for e in events.iter().filter(|e| e.accepted) {
        let t = when(e);
        match y_hat.value_at(t) {
            Some(y) => out.residuals.push(Residual {
                event: *e,
                y_hat_at_sample: y,
                r: y - e.value,
            }),
            None => {
                let msg = format!("{}: no prediction at {t}, lab result skipped", y_hat.tag());
                log::warn!("{msg}");
                out.warnings.push(msg);
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiasState {
    pub b: f64,
    pub alpha: f64,
    pub last_accepted: Option<LabEvent>,
}

impl BiasState {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::validation(format!("bias alpha {alpha} outside (0, 1]")));
        }
        Ok(BiasState {
            b: 0.0,
            alpha,
            last_accepted: None,
        })
    }
}

impl Default for BiasState {
    fn default() -> Self {
        BiasState::new(DEFAULT_BIAS_ALPHA).expect("default alpha is valid")
    }
}

/// `b <- (1 - alpha) b + alpha r`
pub fn update_bias(state: &BiasState, res: &Residual) -> BiasState {
    debug_assert!(res.event.accepted);
    BiasState {
        b: (1.0 - state.alpha) * state.b + state.alpha * res.r,
        alpha: state.alpha,
        last_accepted: Some(res.event),
    }
}

pub fn correct_prediction(y_hat: f64, state: &BiasState) -> f64 {
    y_hat - state.b
}

/// Bias trajectory after each residual, starting from `initial`.
pub fn bias_track(residuals: &[Residual], initial: &BiasState) -> Vec<BiasState> {
    residuals
        .iter()
        .scan(*initial, |st, r| {
            *st = update_bias(st, r);
            Some(*st)
        })
        .collect()
}

/// Applies the bias known at each grid time; a lab result only takes effect
/// once it has been reported.
pub fn correct_series(
    y_hat: &GriddedSeries,
    residuals: &[Residual],
    initial: &BiasState,
) -> Result<GriddedSeries> {
    let mut order: Vec<&Residual> = residuals.iter().collect();
    order.sort_by_key(|r| r.event.result_time);
    let mut state = *initial;
    let mut next = 0;
    let values = (0..y_hat.len())
        .map(|k| {
            let t = y_hat.time_at(k);
            while next < order.len() && order[next].event.result_time <= t {
                state = update_bias(&state, order[next]);
                next += 1;
            }
            y_hat.values()[k].map(|y| correct_prediction(y, &state))
        })
        .collect();
    y_hat.with_values(values)
}

/// Audit trail: one row per lab event, residual columns empty for skipped ones.
pub fn write_lab_audit_csv<W: Write>(
    w: W,
    events: &[LabEvent],
    residuals: &[Residual],
    initial: &BiasState,
) -> Result<()> {
    let mut wr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w);
    wr.write_record([
        "t_i",
        "t_j",
        "value",
        "accepted",
        "y_hat_at_sample",
        "residual",
        "bias_after",
    ])?;
    let mut state = *initial;
    for e in events {
        let res = residuals.iter().find(|r| r.event == *e);
        if let Some(r) = res {
            state = update_bias(&state, r);
        }
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        wr.write_record([
            e.sample_time.to_iso(),
            e.result_time.to_iso(),
            e.value.to_string(),
            e.accepted.to_string(),
            opt(res.map(|r| r.y_hat_at_sample)),
            opt(res.map(|r| r.r)),
            state.b.to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Duration;

    fn ev(i: i64, j: i64, v: f64, accepted: bool) -> LabEvent {
        LabEvent::new(
            Timestamp::from_secs(i),
            Duration::ZERO,
            Timestamp::from_secs(j),
            v,
            accepted,
        )
        .unwrap()
    }

    fn res(r: f64) -> Residual {
        Residual {
            event: ev(0, 10, 0.0, true),
            y_hat_at_sample: r,
            r,
        }
    }

    fn ramp() -> GriddedSeries {
        let v: Vec<f64> = (0..100).map(|k| 10.0 + 0.5 * k as f64).collect();
        GriddedSeries::from_values("YHAT", Timestamp::from_secs(0), Duration::from_secs(10), &v)
            .unwrap()
    }

    #[test]
    fn residual_is_prediction_minus_lab() {
        let y = ramp();
        let events = [ev(50, 300, 12.0, true), ev(60, 400, 3.0, false)];
        let out = compute_residuals(&y, &events);
        assert_eq!(out.residuals.len(), 1);
        assert_eq!(out.residuals[0].y_hat_at_sample, 12.5);
        assert_eq!(out.residuals[0].r, 0.5);
    }

    #[test]
    fn sample_offset_moves_lookup() {
        let y = ramp();
        let e = LabEvent::new(
            Timestamp::from_secs(100),
            Duration::from_secs(-30),
            Timestamp::from_secs(300),
            0.0,
            true,
        )
        .unwrap();
        let out = compute_residuals(&y, &[e]);
        assert_eq!(out.residuals[0].y_hat_at_sample, 13.5);
    }

    #[test]
    fn missing_prediction_skipped_with_warning() {
        let y = ramp();
        let out = compute_residuals(&y, &[ev(5000, 6000, 1.0, true)]);
        assert!(out.residuals.is_empty());
        assert_eq!(out.warnings.len(), 1);
    }

    #[test]
    fn bias_recursion_examples() {
        let st = BiasState::new(1.0).unwrap();
        assert_eq!(update_bias(&st, &res(4.0)).b, 4.0);

        let half = BiasState::new(0.5).unwrap();
        let bs: Vec<f64> = bias_track(&[res(2.0), res(2.0), res(2.0)], &half)
            .iter()
            .map(|s| s.b)
            .collect();
        assert_eq!(bs, vec![1.0, 1.5, 1.75]);

        assert!(BiasState::new(0.0).is_err());
        assert!(BiasState::new(1.5).is_err());
    }

    #[test]
    fn bias_converges_geometrically() {
        let st = BiasState::new(0.3).unwrap();
        let track = bias_track(&vec![res(5.0); 40], &st);
        for (n, s) in track.iter().enumerate() {
            let gap = 5.0 * 0.7f64.powi(n as i32 + 1);
            assert!((5.0 - s.b - gap).abs() < 1e-12);
        }
    }

    #[test]
    fn correction_examples() {
        let mut st = BiasState::default();
        assert_eq!(correct_prediction(7.0, &st), 7.0);
        st.b = 2.0;
        assert_eq!(correct_prediction(100.0, &st), 98.0);
        assert_eq!(correct_prediction(100.0 + 3.5, &st), correct_prediction(100.0, &st) + 3.5);
    }

    #[test]
    fn correct_series_waits_for_report() {
        let y = ramp();
        let r = Residual {
            event: ev(50, 300, 0.0, true),
            y_hat_at_sample: 4.0,
            r: 4.0,
        };
        let out = correct_series(&y, &[r], &BiasState::new(1.0).unwrap()).unwrap();
        assert_eq!(out.values()[29], y.values()[29]);
        assert_eq!(out.values()[30], Some(y.values()[30].unwrap() - 4.0));
    }

    #[test]
    fn audit_csv_rows() {
        let y = ramp();
        let events = [ev(50, 300, 12.0, true), ev(60, 400, 3.0, false)];
        let out = compute_residuals(&y, &events);
        let mut buf = Vec::new();
        write_lab_audit_csv(&mut buf, &events, &out.residuals, &BiasState::new(0.5).unwrap())
            .unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t_i,t_j,value,accepted,y_hat_at_sample,residual,bias_after");
        assert!(lines[1].ends_with(",12,true,12.5,0.5,0.25"));
        assert!(lines[2].ends_with(",3,false,,,0.25"));
    }
}
