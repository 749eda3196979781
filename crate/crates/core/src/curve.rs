//! Tradeoff points and curves shared by the sweep analyses.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MetricKind {
    Exponent,
    Distortion,
    Crb,
    Elmmse,
}

impl MetricKind {
    /// Whether a larger sensing value is better.
    pub fn higher_is_better(self) -> bool {
        matches!(self, MetricKind::Exponent)
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            MetricKind::Exponent => "exponent",
            MetricKind::Distortion => "distortion",
            MetricKind::Crb => "crb",
            MetricKind::Elmmse => "elmmse",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TradeoffPoint {
    /// Bits per channel use.
    pub rate: f64,
    pub sensing_value: f64,
    pub metric_kind: MetricKind,
    /// Scalarisation weight that produced the point.
    pub control: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TradeoffCurve {
    pub points: Vec<TradeoffPoint>,
    pub metadata: Vec<(String, String)>,
}

impl TradeoffCurve {
    pub fn new(points: Vec<TradeoffPoint>) -> Self {
        Self { points, metadata: Vec::new() }
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.metadata.push((key.to_string(), value.to_string()));
        self
    }

    /// Drop consecutive points whose coordinates agree within `tol`.
    pub fn dedup(&self, tol: f64) -> Self {
        let mut points: Vec<TradeoffPoint> = Vec::with_capacity(self.points.len());
        for p in &self.points {
            let dup = points.last().is_some_and(|q| {
                (q.rate - p.rate).abs() <= tol && (q.sensing_value - p.sensing_value).abs() <= tol
            });
            if !dup {
                points.push(*p);
            }
        }
        Self { points, metadata: self.metadata.clone() }
    }

    /// Pareto frontier of the time-sharing closure of the points.
    ///
    /// For exponent curves this is the concave majorant from the
    /// best-sensing point to the best-rate point; for cost-type metrics
    /// (lower is better) the convex minorant. Output is rate ascending.
    pub fn upper_hull(&self) -> Self {
        let kind = self.points.first().map(|p| p.metric_kind);
        let sign = if kind.is_some_and(|k| !k.higher_is_better()) { -1.0 } else { 1.0 };
        let mut pts: Vec<TradeoffPoint> = self.points.clone();
        pts.sort_by(|a, b| {
            a.rate
                .partial_cmp(&b.rate)
                .unwrap()
                .then((sign * b.sensing_value).partial_cmp(&(sign * a.sensing_value)).unwrap())
        });

        let cross = |o: &TradeoffPoint, a: &TradeoffPoint, b: &TradeoffPoint| {
            (a.rate - o.rate) * sign * (b.sensing_value - o.sensing_value)
                - sign * (a.sensing_value - o.sensing_value) * (b.rate - o.rate)
        };
        let mut hull: Vec<TradeoffPoint> = Vec::new();
        for p in pts {
            while hull.len() >= 2 && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], &p) >= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        // Keep only the part from the best-sensing vertex onwards.
        let best = hull
            .iter()
            .enumerate()
            .max_by(|a, b| (sign * a.1.sensing_value).partial_cmp(&(sign * b.1.sensing_value)).unwrap())
            .map(|(i, _)| i)
            .unwrap_or(0);
        let points = hull.split_off(best);
        Self { points, metadata: self.metadata.clone() }
    }

    /// Rate ascending with sensing quality never improving along the curve.
    pub fn is_pareto_consistent(&self, tol: f64) -> bool {
        let sign = if self.points.first().is_some_and(|p| !p.metric_kind.higher_is_better()) { -1.0 } else { 1.0 };
        self.points.windows(2).all(|w| {
            w[1].rate >= w[0].rate - tol && sign * w[1].sensing_value <= sign * w[0].sensing_value + tol
        })
    }
}
