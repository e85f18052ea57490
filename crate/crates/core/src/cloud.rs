use crate::error::{Error, Result};
use crate::geometry::{is_finite, Point3};

/// Ordered scene points plus the sensor origin. Point order is stable:
/// indices are identities throughout the pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Point3>,
    viewpoint: Point3,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>, viewpoint: Point3) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        if let Some(i) = points.iter().position(|p| !is_finite(p)) {
            return Err(Error::NonFinite(i));
        }
        if !is_finite(&viewpoint) {
            return Err(Error::NonFinite(usize::MAX));
        }
        Ok(Self { points, viewpoint })
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &Point3 {
        &self.points[i]
    }

    pub fn viewpoint(&self) -> Point3 {
        self.viewpoint
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Always false: construction rejects empty clouds.
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn centroid(&self) -> Point3 {
        centroid(self.points.iter())
    }

    /// New cloud holding the points at `keep`, in the given order.
    pub fn select(&self, keep: &[usize]) -> Result<Self> {
        let pts = keep
            .iter()
            .map(|&i| {
                self.points.get(i).copied().ok_or(Error::IndexOutOfRange {
                    index: i,
                    len: self.points.len(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(pts, self.viewpoint)
    }
}

pub(crate) fn centroid<'a>(pts: impl Iterator<Item = &'a Point3>) -> Point3 {
    let mut sum = nalgebra::Vector3::zeros();
    let mut n = 0usize;
    for p in pts {
        sum += p.coords;
        n += 1;
    }
    Point3::from(sum / n.max(1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty_and_non_finite() {
        assert!(matches!(
            PointCloud::new(vec![], Point3::origin()),
            Err(Error::EmptyCloud)
        ));
        let bad = vec![Point3::origin(), Point3::new(f64::NAN, 0.0, 0.0)];
        assert!(matches!(
            PointCloud::new(bad, Point3::origin()),
            Err(Error::NonFinite(1))
        ));
    }
}
