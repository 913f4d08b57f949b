use serde::{Deserialize, Serialize};

use super::{ColorScale, LayoutConfig};

/// Idle buildings are neutral gray; red saturation grows with intensity.
const IDLE_RGB: [f64; 3] = [160.0, 160.0, 160.0];
const HOT_RGB: [f64; 3] = [220.0, 20.0, 20.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColorValue {
    pub intensity: f64,
}

impl ColorValue {
    pub fn rgb(&self) -> [u8; 3] {
        let t = self.intensity.clamp(0.0, 1.0);
        std::array::from_fn(|i| (IDLE_RGB[i] + (HOT_RGB[i] - IDLE_RGB[i]) * t).round() as u8)
    }

    pub fn hex(&self) -> String {
        let [r, g, b] = self.rgb();
        format!("#{r:02x}{g:02x}{b:02x}")
    }
}

/// Maps a per-window call count to a color intensity in `[0, 1]`;
/// `cfg.color_ref` calls or more saturate.
pub fn color_for(count: u64, cfg: &LayoutConfig) -> ColorValue {
    if count == 0 {
        return ColorValue { intensity: 0.0 };
    }
    let reference = cfg.color_ref.max(1);
    if count >= reference {
        return ColorValue { intensity: 1.0 };
    }
    let intensity = match cfg.color_scale {
        ColorScale::Linear => count as f64 / reference as f64,
        ColorScale::Log => (count as f64).ln_1p() / (reference as f64).ln_1p(),
    };
    ColorValue { intensity: intensity.min(1.0) }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints() {
        for scale in [ColorScale::Linear, ColorScale::Log] {
            let cfg = LayoutConfig { color_ref: 50, color_scale: scale, ..Default::default() };
            assert_eq!(color_for(0, &cfg).intensity, 0.0);
            assert_eq!(color_for(50, &cfg).intensity, 1.0);
            assert_eq!(color_for(100, &cfg).intensity, 1.0);
            assert_eq!(color_for(0, &cfg).rgb(), [160, 160, 160]);
            assert_eq!(color_for(50, &cfg).hex(), "#dc1414");
        }
    }

    #[test]
    fn scale_formulas() {
        let lin = LayoutConfig { color_ref: 200, color_scale: ColorScale::Linear, ..Default::default() };
        assert_eq!(color_for(50, &lin).intensity, 0.25);
        let log = LayoutConfig { color_ref: 1000, color_scale: ColorScale::Log, ..Default::default() };
        let expected = 11f64.ln() / 1001f64.ln();
        assert!((color_for(10, &log).intensity - expected).abs() < 1e-15);
        let one = LayoutConfig { color_ref: 1, ..Default::default() };
        assert_eq!(color_for(1, &one).intensity, 1.0);
    }
}
