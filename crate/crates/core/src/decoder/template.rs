use alloc::vec::Vec;

use num_traits::Float;

use crate::shapes::point_segment_distance;

/// Edge primitives copied onto the canvas by the drawing module. This
/// dataset only has one relation, so the bank holds one anti-aliased
/// horizontal segment.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateBank {
    pub width: usize,
    pub height: usize,
    /// Row-major intensities in `[0, 1]`.
    pub data: Vec<f64>,
    /// Template-pixel positions the two edge endpoints map onto.
    pub anchors: [[f64; 2]; 2],
    /// Stroke thickness inside the template, in template pixels.
    pub thickness: f64,
}

impl Default for TemplateBank {
    fn default() -> Self {
        Self::segment(64, 8, [[4.0, 4.0], [60.0, 4.0]], 2.0)
    }
}

impl TemplateBank {
    /// Capsule stroke between the anchors with the same coverage profile as
    /// the dataset rasterizer, kept at full precision.
    pub fn segment(width: usize, height: usize, anchors: [[f64; 2]; 2], thickness: f64) -> Self {
        assert!(anchors[0] != anchors[1], "template anchors must be distinct");
        let reach = thickness / 2.0 + 0.5;
        let data = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .map(|(x, y)| {
                let d = point_segment_distance([x as f64, y as f64], anchors[0], anchors[1]);
                (reach - d).clamp(0.0, 1.0)
            })
            .collect();
        TemplateBank {
            width,
            height,
            data,
            anchors,
            thickness,
        }
    }

    pub fn anchor_length(&self) -> f64 {
        Float::hypot(
            self.anchors[1][0] - self.anchors[0][0],
            self.anchors[1][1] - self.anchors[0][1],
        )
    }

    pub fn values<T: Float>(&self) -> Vec<T> {
        self.data.iter().map(|&v| T::from(v).unwrap()).collect()
    }
}
