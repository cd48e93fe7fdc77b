//! Roundabout layout, designated paths through it, and region lookup.
//!
//! The ring is a circle around `center`. Every arm is a straight two-lane
//! corridor aimed at the center; traffic keeps right, so the inbound lane sits
//! `(lane_width + median) / 2` to the left of the outward arm direction and the
//! outbound lane the same distance to its right. Vehicles circulate counter-clockwise.
//! Entry and exit arcs are clockwise circular blends of curvature
//! `entry_exit_curvature`, tangent to both the lane line and the ring centerline.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{wrap_angle, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid layout: {0}")]
    InvalidLayout(String),
    #[error("arm index {index} out of range (layout has {count} arms)")]
    InvalidArm { index: usize, count: usize },
    #[error("entry and exit arm are both {0}; U-turn paths are not supported")]
    UTurn(usize),
    #[error("station {station} outside path of length {length}")]
    StationOutOfRange { station: f64, length: f64 },
    #[error("point ({x}, {y}) is outside the drivable area")]
    OffRoad { x: f64, y: f64 },
    #[error("invalid path: {0}")]
    InvalidPath(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> Point2<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn from_angle(angle: T) -> Self {
        Self::new(angle.cos(), angle.sin())
    }

    pub fn dot(self, other: Self) -> T {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3-D cross product.
    pub fn cross(self, other: Self) -> T {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> T {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Self) -> T {
        (self - other).norm()
    }

    /// Counter-clockwise perpendicular.
    pub fn perp(self) -> Self {
        Self::new(-self.y, self.x)
    }

    pub fn angle(self) -> T {
        self.y.atan2(self.x)
    }
}

impl<T: Real> Add for Point2<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl<T: Real> Sub for Point2<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl<T: Real> Mul<T> for Point2<T> {
    type Output = Self;
    fn mul(self, rhs: T) -> Self {
        Self::new(self.x * rhs, self.y * rhs)
    }
}

impl<T: Real> Neg for Point2<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

/// A straight approach road. `heading` points from the ring center outwards;
/// `length` is measured from the center to the far end of the arm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arm<T> {
    pub heading: T,
    pub length: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundaboutLayout<T> {
    pub center: Point2<T>,
    pub ring_radius: T,
    pub lane_width: T,
    /// Width of the divider between the inbound and outbound lane of an arm.
    #[serde(default)]
    pub median: T,
    pub arms: Vec<Arm<T>>,
    pub entry_exit_curvature: T,
    pub entry_exit_band: T,
}

/// Where an entry or exit blend arc meets the arm and the ring.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JunctionGeometry<T> {
    /// Distance along the arm axis from the center to where the lane line meets the blend arc.
    pub lane_tangent_distance: T,
    /// Angular offset of the ring junction from the arm heading.
    pub ring_offset: T,
    /// Heading change over one blend arc (negative, clockwise).
    pub blend_turn: T,
}

impl<T: Real> RoundaboutLayout<T> {
    pub fn new(
        center: Point2<T>,
        ring_radius: T,
        lane_width: T,
        arms: Vec<Arm<T>>,
        entry_exit_curvature: T,
        entry_exit_band: T,
    ) -> Result<Self, GeometryError> {
        let layout = Self {
            center,
            ring_radius,
            lane_width,
            median: T::zero(),
            arms,
            entry_exit_curvature,
            entry_exit_band,
        };
        layout.validate()?;
        Ok(layout)
    }

    /// Four arms (east, north, west, south) around a 20 m ring. Each arm has
    /// a 4 m median so opposing lanes stay clear of the collision distance.
    pub fn four_way() -> Self {
        let arm = |deg: f64| Arm {
            heading: T::lit(deg.to_radians()),
            length: T::lit(70.0),
        };
        Self::new(
            Point2::new(T::zero(), T::zero()),
            T::lit(20.0),
            T::lit(4.0),
            vec![arm(0.0), arm(90.0), arm(180.0), arm(270.0)],
            T::lit(0.15),
            T::lit(6.0),
        )
        .and_then(|l| l.with_median(T::lit(4.0)))
        .map(|mut l| {
            l.entry_exit_band = l.arc_band();
            l
        })
        .expect("default layout is valid")
    }

    /// Radial distance beyond the ring edge at which the entry and exit arcs
    /// leave the arm lanes; as the band width it makes the zone start where the arcs do.
    pub fn arc_band(&self) -> T {
        let along = self.junction().lane_tangent_distance;
        let offset = self.lane_offset();
        ((along * along + offset * offset).sqrt() - self.ring_radius - self.lane_width * T::half()).max(T::zero())
    }

    pub fn with_median(mut self, median: T) -> Result<Self, GeometryError> {
        self.median = median;
        self.validate()?;
        Ok(self)
    }

    /// Distance from an arm axis to the center line of either of its lanes.
    pub fn lane_offset(&self) -> T {
        (self.lane_width + self.median) * T::half()
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let bad = |msg: String| Err(GeometryError::InvalidLayout(msg));
        let finite = [
            self.center.x,
            self.center.y,
            self.ring_radius,
            self.lane_width,
            self.median,
            self.entry_exit_curvature,
            self.entry_exit_band,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return bad("non-finite layout parameter".into());
        }
        if self.ring_radius <= T::zero() {
            return bad(format!("ring_radius must be > 0, got {}", self.ring_radius));
        }
        if self.lane_width <= T::zero() {
            return bad(format!("lane_width must be > 0, got {}", self.lane_width));
        }
        if self.entry_exit_curvature <= T::zero() {
            return bad(format!(
                "entry_exit_curvature must be > 0, got {}",
                self.entry_exit_curvature
            ));
        }
        if self.entry_exit_band < T::zero() {
            return bad(format!("entry_exit_band must be >= 0, got {}", self.entry_exit_band));
        }
        if self.median < T::zero() {
            return bad(format!("median must be >= 0, got {}", self.median));
        }
        if self.lane_width * T::half() >= self.ring_radius {
            return bad("half lane width must be smaller than the ring radius".into());
        }
        if self.arms.is_empty() {
            return bad("layout needs at least one arm".into());
        }
        let junction = self.junction();
        let eps = T::lit(1e-9);
        for (i, arm) in self.arms.iter().enumerate() {
            if !arm.heading.is_finite() || !arm.length.is_finite() {
                return bad(format!("arm {i} has non-finite parameters"));
            }
            if arm.length <= junction.lane_tangent_distance {
                return bad(format!(
                    "arm {i} length {} does not reach past the blend arc ({})",
                    arm.length, junction.lane_tangent_distance
                ));
            }
            for (j, other) in self.arms.iter().enumerate().skip(i + 1) {
                let diff = wrap_angle(arm.heading - other.heading);
                if diff < eps || T::two_pi() - diff < eps {
                    return bad(format!("arms {i} and {j} share heading {}", arm.heading));
                }
            }
        }
        Ok(())
    }

    pub fn junction(&self) -> JunctionGeometry<T> {
        let blend_radius = self.entry_exit_curvature.recip();
        let lateral = self.lane_offset() + blend_radius;
        let hyp = self.ring_radius + blend_radius;
        let along = (hyp * hyp - lateral * lateral).sqrt();
        let ring_offset = lateral.atan2(along);
        JunctionGeometry {
            lane_tangent_distance: along,
            ring_offset,
            blend_turn: ring_offset - T::FRAC_PI_2(),
        }
    }

    fn arm(&self, index: usize) -> Result<&Arm<T>, GeometryError> {
        self.arms.get(index).ok_or(GeometryError::InvalidArm {
            index,
            count: self.arms.len(),
        })
    }

    /// Builds the designated path Straight → EntryArc → RingArc → ExitArc → Straight.
    /// The target point is the far end of the outbound lane.
    pub fn build_path(&self, entry_arm: usize, exit_arm: usize) -> Result<PathSpec<T>, GeometryError> {
        let entry = *self.arm(entry_arm)?;
        let exit = *self.arm(exit_arm)?;
        if entry_arm == exit_arm {
            return Err(GeometryError::UTurn(entry_arm));
        }
        let c = self.center;
        let offset = self.lane_offset();
        let junction = self.junction();
        let blend_radius = self.entry_exit_curvature.recip();
        let blend_length = -junction.blend_turn * blend_radius;

        let u_in = Point2::from_angle(entry.heading);
        let n_in = u_in.perp();
        let inbound_start = c + u_in * entry.length + n_in * offset;
        let inbound_heading = wrap_angle(entry.heading + T::PI());
        let straight_in = Segment::straight(
            inbound_start,
            inbound_heading,
            entry.length - junction.lane_tangent_distance,
        );
        let entry_arc = Segment::arc(
            SegmentKind::EntryArc,
            straight_in.end,
            inbound_heading,
            -self.entry_exit_curvature,
            blend_length,
        );

        let ring_start_angle = entry.heading + junction.ring_offset;
        let ring_end_angle = exit.heading - junction.ring_offset;
        let mut sweep = wrap_angle(ring_end_angle - ring_start_angle);
        if sweep <= T::zero() {
            sweep = T::two_pi();
        }
        let ring_arc = Segment::arc(
            SegmentKind::RingArc,
            c + Point2::from_angle(ring_start_angle) * self.ring_radius,
            wrap_angle(ring_start_angle + T::FRAC_PI_2()),
            self.ring_radius.recip(),
            sweep * self.ring_radius,
        );
        let exit_arc = Segment::arc(
            SegmentKind::ExitArc,
            c + Point2::from_angle(ring_end_angle) * self.ring_radius,
            wrap_angle(ring_end_angle + T::FRAC_PI_2()),
            -self.entry_exit_curvature,
            blend_length,
        );

        let u_out = Point2::from_angle(exit.heading);
        let n_out = u_out.perp();
        let outbound_start = c + u_out * junction.lane_tangent_distance - n_out * offset;
        let straight_out = Segment::straight(
            outbound_start,
            wrap_angle(exit.heading),
            exit.length - junction.lane_tangent_distance,
        );
        let target = straight_out.end;
        PathSpec::new(
            vec![straight_in, entry_arc, ring_arc, exit_arc, straight_out],
            target,
        )
    }

    /// Classifies a point into the straight, enter/exit or ring area.
    /// Points on the ring annulus boundary count as ring.
    pub fn classify_region(&self, position: Point2<T>) -> Result<RegionKind, GeometryError> {
        let rel = position - self.center;
        let radial = rel.norm();
        let half_lane = self.lane_width * T::half();
        if (radial - self.ring_radius).abs() <= half_lane {
            return Ok(RegionKind::Ring);
        }
        let off_road = GeometryError::OffRoad {
            x: position.x.as_f64(),
            y: position.y.as_f64(),
        };
        if radial < self.ring_radius {
            return Err(off_road);
        }
        let band_outer = self.ring_radius + half_lane + self.entry_exit_band;
        let flare = self.lane_offset() + self.entry_exit_curvature.recip();
        let slack = T::lit(1e-9);
        for arm in &self.arms {
            let u = Point2::from_angle(arm.heading);
            let along = rel.dot(u);
            let lateral = rel.dot(u.perp()).abs();
            if along <= T::zero() || along > arm.length * (T::one() + slack) + slack {
                continue;
            }
            if radial <= band_outer {
                if lateral <= flare {
                    return Ok(RegionKind::EnterExit);
                }
            } else if lateral <= self.lane_offset() + half_lane {
                return Ok(RegionKind::Straight);
            }
        }
        Err(off_road)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SegmentKind {
    Straight,
    EntryArc,
    RingArc,
    ExitArc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegionKind {
    Straight,
    EnterExit,
    Ring,
}

impl SegmentKind {
    pub fn region(self) -> RegionKind {
        match self {
            SegmentKind::Straight => RegionKind::Straight,
            SegmentKind::EntryArc | SegmentKind::ExitArc => RegionKind::EnterExit,
            SegmentKind::RingArc => RegionKind::Ring,
        }
    }
}

/// A constant-curvature piece of a path. Curvature is signed, counter-clockwise positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment<T> {
    pub kind: SegmentKind,
    pub start: Point2<T>,
    pub end: Point2<T>,
    pub start_heading: T,
    pub curvature: T,
    pub length: T,
}

/// Nearest-point query result. `lateral_offset` is positive to the left of travel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection<T> {
    pub station: T,
    pub lateral_offset: T,
    pub distance: T,
}

impl<T: Real> Segment<T> {
    pub fn straight(start: Point2<T>, heading: T, length: T) -> Self {
        let end = start + Point2::from_angle(heading) * length;
        Self {
            kind: SegmentKind::Straight,
            start,
            end,
            start_heading: heading,
            curvature: T::zero(),
            length,
        }
    }

    pub fn arc(kind: SegmentKind, start: Point2<T>, heading: T, curvature: T, length: T) -> Self {
        let mut segment = Self {
            kind,
            start,
            end: start,
            start_heading: heading,
            curvature,
            length,
        };
        segment.end = segment.point_at(length);
        segment
    }

    pub fn heading_at(&self, s: T) -> T {
        self.start_heading + self.curvature * s
    }

    pub fn point_at(&self, s: T) -> Point2<T> {
        let h0 = self.start_heading;
        if self.curvature == T::zero() {
            return self.start + Point2::from_angle(h0) * s;
        }
        let h = h0 + self.curvature * s;
        let k = self.curvature;
        self.start + Point2::new((h.sin() - h0.sin()) / k, (h0.cos() - h.cos()) / k)
    }

    fn center(&self) -> Point2<T> {
        let h0 = self.start_heading;
        self.start + Point2::new(-h0.sin(), h0.cos()) * self.curvature.recip()
    }

    /// Nearest point on this segment; `station` is local to the segment.
    pub fn project(&self, q: Point2<T>) -> Projection<T> {
        let local = if self.curvature == T::zero() {
            let dir = Point2::from_angle(self.start_heading);
            (q - self.start).dot(dir).max(T::zero()).min(self.length)
        } else {
            let d = q - self.center();
            let r = d.norm();
            if r <= T::epsilon() {
                T::zero()
            } else {
                let sign = self.curvature.signum();
                let u = d * (sign / r);
                let heading = u.x.atan2(-u.y);
                let s = wrap_angle((heading - self.start_heading) * sign) / self.curvature.abs();
                if s <= self.length {
                    s
                } else if q.distance(self.end) < q.distance(self.start) {
                    self.length
                } else {
                    T::zero()
                }
            }
        };
        let p = self.point_at(local);
        let tangent = Point2::from_angle(self.heading_at(local));
        let offset = q - p;
        Projection {
            station: local,
            lateral_offset: tangent.cross(offset),
            distance: offset.norm(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathSpec<T> {
    pub segments: Vec<Segment<T>>,
    pub target_point: Point2<T>,
    #[serde(skip)]
    offsets: Vec<T>,
    #[serde(skip)]
    total: T,
}

pub const CONTINUITY_TOLERANCE: f64 = 1e-6;

impl<T: Real> PathSpec<T> {
    pub fn new(segments: Vec<Segment<T>>, target_point: Point2<T>) -> Result<Self, GeometryError> {
        if segments.is_empty() {
            return Err(GeometryError::InvalidPath("no segments".into()));
        }
        // single precision cannot resolve 1e-6 m at arm-length coordinates
        let tol = T::lit(CONTINUITY_TOLERANCE).max(T::epsilon() * T::lit(1024.0));
        for (i, pair) in segments.windows(2).enumerate() {
            let gap = pair[0].end.distance(pair[1].start);
            if !(gap < tol) {
                return Err(GeometryError::InvalidPath(format!(
                    "segments {i} and {} are {gap} m apart",
                    i + 1
                )));
            }
        }
        for (i, seg) in segments.iter().enumerate() {
            if !(seg.length >= T::zero()) {
                return Err(GeometryError::InvalidPath(format!("segment {i} has negative length")));
            }
            if seg.kind == SegmentKind::Straight && seg.curvature != T::zero() {
                return Err(GeometryError::InvalidPath(format!("straight segment {i} is curved")));
            }
        }
        let mut offsets = Vec::with_capacity(segments.len());
        let mut total = T::zero();
        for seg in &segments {
            offsets.push(total);
            total += seg.length;
        }
        if !(total > T::zero()) {
            return Err(GeometryError::InvalidPath("total length must be > 0".into()));
        }
        Ok(Self {
            segments,
            target_point,
            offsets,
            total,
        })
    }

    /// A single straight road, target at its far end.
    pub fn straight(start: Point2<T>, heading: T, length: T) -> Result<Self, GeometryError> {
        let seg = Segment::straight(start, heading, length);
        let end = seg.end;
        Self::new(vec![seg], end)
    }

    pub fn total_length(&self) -> T {
        self.total
    }

    pub fn segment_start(&self, index: usize) -> T {
        self.offsets[index]
    }

    /// Segment index and local station. Boundaries resolve to the later segment;
    /// stations outside `[0, total]` are clamped.
    pub fn locate(&self, station: T) -> (usize, T) {
        let s = station.max(T::zero()).min(self.total);
        let idx = match self
            .offsets
            .binary_search_by(|o| o.partial_cmp(&s).unwrap_or(std::cmp::Ordering::Less))
        {
            Ok(mut i) => {
                // zero-length segments share an offset; take the last one
                while i + 1 < self.offsets.len() && self.offsets[i + 1] == s {
                    i += 1;
                }
                i
            }
            Err(i) => i - 1,
        };
        (idx, s - self.offsets[idx])
    }

    pub fn curvature_at(&self, station: T) -> Result<T, GeometryError> {
        if !(station >= T::zero() && station <= self.total) {
            return Err(GeometryError::StationOutOfRange {
                station: station.as_f64(),
                length: self.total.as_f64(),
            });
        }
        Ok(self.segments[self.locate(station).0].curvature)
    }

    /// Curvature with the station clamped onto the path.
    pub fn curvature_clamped(&self, station: T) -> T {
        self.segments[self.locate(station).0].curvature
    }

    pub fn kind_at(&self, station: T) -> SegmentKind {
        self.segments[self.locate(station).0].kind
    }

    pub fn point_at(&self, station: T) -> Point2<T> {
        let (i, local) = self.locate(station);
        self.segments[i].point_at(local)
    }

    /// Position and heading (wrapped) at a station clamped onto the path.
    pub fn pose_at(&self, station: T) -> (Point2<T>, T) {
        let (i, local) = self.locate(station);
        let seg = &self.segments[i];
        (seg.point_at(local), wrap_angle(seg.heading_at(local)))
    }

    /// Nearest path point by Euclidean distance; ties go to the smaller station.
    pub fn project(&self, position: Point2<T>) -> Projection<T> {
        let mut best: Option<Projection<T>> = None;
        for (seg, &offset) in self.segments.iter().zip(&self.offsets) {
            let mut p = seg.project(position);
            p.station += offset;
            if best.map_or(true, |b| p.distance < b.distance) {
                best = Some(p);
            }
        }
        best.expect("path has segments")
    }
}
