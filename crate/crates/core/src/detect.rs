//! Region-of-interest refinement: threshold an event frame, keep the largest
//! 8-connected blob and report its bounding box.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::SensorGeometry;
use crate::framing::EventFrame;
use crate::scalar::Scalar;

/// Default binarization threshold on the 0–255 grayscale.
pub const DEFAULT_THRESHOLD: u32 = 50;
/// Default count that saturates the grayscale at 255.
pub const DEFAULT_CAP: u32 = 5;

/// Axis-aligned box; `(x, y)` is the top-left pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl BoundingBox {
    pub fn new(x: u32, y: u32, w: u32, h: u32) -> Result<Self> {
        if w == 0 || h == 0 {
            return Err(Error::InvalidRoi(format!("box {w}x{h} is empty")));
        }
        Ok(Self { x, y, w, h })
    }

    /// Whole-sensor box.
    pub fn full(geometry: SensorGeometry) -> Self {
        Self { x: 0, y: 0, w: geometry.width, h: geometry.height }
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        x >= self.x && y >= self.y && x - self.x < self.w && y - self.y < self.h
    }

    pub fn fits(&self, geometry: SensorGeometry) -> bool {
        self.w > 0 && self.h > 0 && self.x as u64 + self.w as u64 <= geometry.width as u64
            && self.y as u64 + self.h as u64 <= geometry.height as u64
    }

    pub fn area(&self) -> u64 {
        self.w as u64 * self.h as u64
    }

    pub fn translated(&self, dx: u32, dy: u32) -> Self {
        Self { x: self.x + dx, y: self.y + dy, ..*self }
    }

    fn intersection_area(&self, other: &Self) -> u64 {
        let x0 = self.x.max(other.x) as u64;
        let y0 = self.y.max(other.y) as u64;
        let x1 = (self.x as u64 + self.w as u64).min(other.x as u64 + other.w as u64);
        let y1 = (self.y as u64 + self.h as u64).min(other.y as u64 + other.h as u64);
        x1.saturating_sub(x0) * y1.saturating_sub(y0)
    }
}

/// Intersection over union of two boxes.
pub fn iou<T: Scalar>(a: &BoundingBox, b: &BoundingBox) -> T {
    let inter = a.intersection_area(b);
    let union = a.area() + b.area() - inter;
    if union == 0 {
        return T::zero();
    }
    T::from_u64(inter).unwrap() / T::from_u64(union).unwrap()
}

/// Row-major binary mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryImage {
    pub width: u32,
    pub height: u32,
    pub data: Vec<bool>,
}

impl BinaryImage {
    pub fn new(width: u32, height: u32) -> Self {
        Self { width, height, data: vec![false; width as usize * height as usize] }
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.data[(y * self.width + x) as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, v: bool) {
        self.data[(y * self.width + x) as usize] = v;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    /// Paints every pixel of `b` (clipped to the image).
    pub fn fill_box(&mut self, b: &BoundingBox) {
        for y in b.y..(b.y + b.h).min(self.height) {
            for x in b.x..(b.x + b.w).min(self.width) {
                self.set(x, y, true);
            }
        }
    }
}

/// Grayscale level of a count: `min(count, cap) * 255 / cap`.
pub fn gray_level(count: u32, cap: u32) -> u32 {
    count.min(cap) * 255 / cap
}

/// Sets a pixel when its grayscale level is `>= threshold`.
pub fn binarize(frame: &EventFrame, threshold: u32, cap: u32) -> Result<BinaryImage> {
    if cap == 0 {
        return Err(Error::InvalidConfig("grayscale cap must be > 0".into()));
    }
    Ok(BinaryImage {
        width: frame.width,
        height: frame.height,
        data: frame.counts.iter().map(|&c| gray_level(c, cap) >= threshold).collect(),
    })
}

/// One 8-connected component.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    pub area: u64,
    pub bbox: BoundingBox,
}

/// All 8-connected components, in raster order of their first pixel.
pub fn components(image: &BinaryImage) -> Vec<Component> {
    let (w, h) = (image.width as i64, image.height as i64);
    let mut seen = vec![false; image.data.len()];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for start in 0..image.data.len() {
        if !image.data[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let (mut x0, mut y0, mut x1, mut y1) = (u32::MAX, u32::MAX, 0u32, 0u32);
        let mut area = 0u64;
        while let Some(i) = stack.pop() {
            let (x, y) = ((i as i64 % w) as u32, (i as i64 / w) as u32);
            area += 1;
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                    if (dx, dy) == (0, 0) || nx < 0 || ny < 0 || nx >= w || ny >= h {
                        continue;
                    }
                    let j = (ny * w + nx) as usize;
                    if image.data[j] && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        out.push(Component {
            area,
            bbox: BoundingBox { x: x0, y: y0, w: x1 - x0 + 1, h: y1 - y0 + 1 },
        });
    }
    out
}

/// Bounding box of the component with the largest filled area, or `None`
/// for an empty image. Ties go to the component found first in raster order.
pub fn largest_contour_bbox(image: &BinaryImage) -> Option<BoundingBox> {
    components(image)
        .into_iter()
        .fold(None::<Component>, |best, c| match best {
            Some(b) if b.area >= c.area => Some(b),
            _ => Some(c),
        })
        .map(|c| c.bbox)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn frame(width: u32, height: u32, pts: &[(u32, u32, u32)]) -> EventFrame {
        let mut f = EventFrame::zeros(SensorGeometry::new(width, height).unwrap(), 0);
        for &(x, y, c) in pts {
            f.counts[(y * width + x) as usize] = c;
        }
        f
    }

    #[test]
    fn binarize_defaults() {
        let empty = frame(4, 4, &[]);
        assert_eq!(binarize(&empty, DEFAULT_THRESHOLD, DEFAULT_CAP).unwrap().count(), 0);

        let f = frame(4, 4, &[(0, 0, 40), (3, 3, 1)]);
        let b = binarize(&f, DEFAULT_THRESHOLD, DEFAULT_CAP).unwrap();
        assert!(b.get(0, 0) && b.get(3, 3));
        assert_eq!(b.count(), 2);

        // 1 event -> gray 51: set at 51, unset just above
        assert!(binarize(&f, 51, DEFAULT_CAP).unwrap().get(3, 3));
        assert!(!binarize(&f, 52, DEFAULT_CAP).unwrap().get(3, 3));
        assert!(binarize(&f, 50, 0).is_err());
    }

    #[test]
    fn square_gives_its_box() {
        let mut img = BinaryImage::new(32, 32);
        img.fill_box(&BoundingBox::new(5, 5, 10, 10).unwrap());
        assert_eq!(largest_contour_bbox(&img), Some(BoundingBox::new(5, 5, 10, 10).unwrap()));
    }

    #[test]
    fn larger_square_wins() {
        let mut img = BinaryImage::new(40, 40);
        img.fill_box(&BoundingBox::new(1, 1, 3, 3).unwrap());
        img.fill_box(&BoundingBox::new(20, 20, 10, 10).unwrap());
        assert_eq!(largest_contour_bbox(&img), Some(BoundingBox::new(20, 20, 10, 10).unwrap()));
    }

    #[test]
    fn empty_image_has_no_box() {
        assert_eq!(largest_contour_bbox(&BinaryImage::new(8, 8)), None);
    }

    #[test]
    fn diagonal_neighbours_connect() {
        let mut img = BinaryImage::new(5, 5);
        for i in 0..5 {
            img.set(i, i, true);
        }
        let comps = components(&img);
        assert_eq!(comps.len(), 1);
        assert_eq!(comps[0].area, 5);
        assert_eq!(comps[0].bbox, BoundingBox::new(0, 0, 5, 5).unwrap());
    }

    #[test]
    fn iou_values() {
        let a = BoundingBox::new(0, 0, 10, 10).unwrap();
        let b = BoundingBox::new(5, 0, 10, 10).unwrap();
        let far = BoundingBox::new(50, 50, 3, 3).unwrap();
        assert_relative_eq!(iou::<f64>(&a, &a), 1.0);
        assert_eq!(iou::<f64>(&a, &far), 0.0);
        assert_relative_eq!(iou::<f64>(&a, &b), 50.0 / 150.0);
        assert_relative_eq!(iou::<f32>(&b, &a), 1.0 / 3.0);
    }

    #[test]
    fn box_geometry() {
        let g = SensorGeometry::new(10, 10).unwrap();
        assert!(BoundingBox::new(0, 0, 10, 10).unwrap().fits(g));
        assert!(!BoundingBox::new(1, 0, 10, 10).unwrap().fits(g));
        assert!(BoundingBox::new(0, 0, 0, 1).is_err());
        let b = BoundingBox::new(2, 2, 2, 2).unwrap();
        assert!(b.contains(3, 3) && !b.contains(4, 3) && !b.contains(1, 2));
    }
}
