//! Map processing: centering on the UAV, local crop, global average pooling
//! and the observation handed to the Q-network.
//!
//! For an `M x M` map the centered stack is `M_c x M_c` with `M_c = 2M - 1`
//! and the UAV cell at `(M - 1, M - 1)`. Cells that fall outside the map are
//! filled with a per-layer pad value: `[0, 1, 1]` for the environment layers
//! (outside counts as no-fly zone and obstacle) and `0` for the target.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Layers, Position};
use crate::world::EpisodeState;

pub const ENV_PAD: [f64; 3] = [0.0, 1.0, 1.0];
pub const TARGET_PAD: [f64; 1] = [0.0];

/// Environment layers plus the target layer.
pub const OBSERVATION_CHANNELS: usize = 4;

pub fn centered_side(map_size: usize) -> usize {
    2 * map_size - 1
}

/// Local crop size `l` (0 disables the local branch) and global pooling
/// factor `g`. `(0, 1)` feeds the full centered map, uncompressed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ObservationSpec {
    pub local_size: usize,
    pub global_scaling: usize,
}

impl ObservationSpec {
    pub const DISABLED: ObservationSpec = ObservationSpec {
        local_size: 0,
        global_scaling: 1,
    };

    pub const fn new(local_size: usize, global_scaling: usize) -> Self {
        Self {
            local_size,
            global_scaling,
        }
    }

    pub fn is_disabled(&self) -> bool {
        *self == Self::DISABLED
    }

    pub fn global_side(&self, map_size: usize) -> usize {
        centered_side(map_size) / self.global_scaling.max(1)
    }

    pub fn validate(&self, map_size: usize) -> Result<()> {
        let mc = centered_side(map_size);
        if self.global_scaling == 0 {
            return Err(Error::InvalidConfig("global scaling g must be >= 1".into()));
        }
        if self.global_scaling > mc {
            return Err(Error::Infeasible(format!(
                "global scaling {} exceeds the centered map side {mc}",
                self.global_scaling
            )));
        }
        if self.local_size != 0 && self.local_size % 2 == 0 {
            return Err(Error::InvalidConfig(format!(
                "local map size {} must be odd (or 0 to disable)",
                self.local_size
            )));
        }
        if self.local_size > mc {
            return Err(Error::Infeasible(format!(
                "local map size {} exceeds the centered map side {mc}",
                self.local_size
            )));
        }
        Ok(())
    }
}

impl std::fmt::Display for ObservationSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "l={},g={}", self.local_size, self.global_scaling)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CenteredMap {
    pub layers: Layers,
    pub pad: Vec<f64>,
}

impl CenteredMap {
    pub fn side(&self) -> usize {
        self.layers.side()
    }

    /// Side of the map this was centered from.
    pub fn source_size(&self) -> usize {
        (self.layers.side() + 1) / 2
    }
}

/// Centers `map` on `position`: output `(i, j)` is source
/// `(i + p0 - M + 1, j + p1 - M + 1)` when that is on the map, else `pad`.
pub fn center(map: &Layers, position: Position, pad: &[f64]) -> Result<CenteredMap> {
    let m = map.side();
    position.check_on(m)?;
    if pad.len() != map.channels() {
        return Err(Error::ShapeMismatch(format!(
            "pad has {} values for {} layers",
            pad.len(),
            map.channels()
        )));
    }
    let mc = centered_side(m);
    let mut out = Layers::filled(mc, pad);
    // Source row r lands at output row r + (M - 1 - p0).
    let row_shift = m - 1 - position.row;
    let col_shift = m - 1 - position.col;
    for ch in 0..map.channels() {
        let src = map.plane(ch);
        let dst = out.plane_mut(ch);
        for r in 0..m {
            let o = (r + row_shift) * mc + col_shift;
            dst[o..o + m].copy_from_slice(&src[r * m..(r + 1) * m]);
        }
    }
    Ok(CenteredMap {
        layers: out,
        pad: pad.to_vec(),
    })
}

/// Central `l x l` crop: output `(i, j)` is centered
/// `(i + M - ceil(l/2), j + M - ceil(l/2))`.
pub fn local_map(centered: &CenteredMap, l: usize) -> Result<Layers> {
    let mc = centered.side();
    if l == 0 || l > mc {
        return Err(Error::Infeasible(format!("local map size {l} outside 1..={mc}")));
    }
    let offset = centered.source_size() - l.div_ceil(2);
    let src = &centered.layers;
    let mut out = Layers::zeros(src.channels(), l);
    for ch in 0..src.channels() {
        let s = src.plane(ch);
        let d = out.plane_mut(ch);
        for i in 0..l {
            let o = (i + offset) * mc + offset;
            d[i * l..(i + 1) * l].copy_from_slice(&s[o..o + l]);
        }
    }
    Ok(out)
}

/// `g x g` average pooling. Rows and columns past `g * floor(M_c / g)` are
/// dropped.
pub fn global_map(centered: &CenteredMap, g: usize) -> Result<Layers> {
    if g == 0 {
        return Err(Error::InvalidConfig("global scaling g must be >= 1".into()));
    }
    let mc = centered.side();
    let side = mc / g;
    let src = &centered.layers;
    let mut out = Layers::zeros(src.channels(), side);
    let norm = 1.0 / (g * g) as f64;
    for ch in 0..src.channels() {
        let s = src.plane(ch);
        let d = out.plane_mut(ch);
        for i in 0..side {
            for j in 0..side {
                let mut acc = 0.0;
                for u in 0..g {
                    let row = &s[(g * i + u) * mc + g * j..][..g];
                    acc += row.iter().sum::<f64>();
                }
                d[i * side + j] = acc * norm;
            }
        }
    }
    Ok(out)
}

/// Agent input: local and global stacks (3 environment layers then the
/// target layer, channel-major) and the remaining flying time. Values are
/// stored as `f32`; replay memory holds many of these.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub local_side: usize,
    pub global_side: usize,
    pub local: Vec<f32>,
    pub global: Vec<f32>,
    pub flying_time: u32,
}

impl Observation {
    fn plane_split(data: &[f32], side: usize) -> (&[f32], &[f32]) {
        data.split_at(3 * side * side)
    }

    pub fn local_env(&self) -> &[f32] {
        Self::plane_split(&self.local, self.local_side).0
    }

    pub fn local_target(&self) -> &[f32] {
        Self::plane_split(&self.local, self.local_side).1
    }

    pub fn global_env(&self) -> &[f32] {
        Self::plane_split(&self.global, self.global_side).0
    }

    pub fn global_target(&self) -> &[f32] {
        Self::plane_split(&self.global, self.global_side).1
    }

    pub fn memory_bytes(&self) -> usize {
        (self.local.len() + self.global.len()) * std::mem::size_of::<f32>()
    }
}

fn to_f32(layers: &[&Layers]) -> Vec<f32> {
    layers
        .iter()
        .flat_map(|l| l.data().iter().map(|&v| v as f32))
        .collect()
}

/// Builds the observation from environment/target layers directly.
pub fn observe_layers(
    env_layers: &Layers,
    target_layers: &Layers,
    position: Position,
    flying_time: u32,
    spec: ObservationSpec,
) -> Result<Observation> {
    spec.validate(env_layers.side())?;
    let env_c = center(env_layers, position, &ENV_PAD)?;
    let tgt_c = center(target_layers, position, &TARGET_PAD)?;
    let (local, local_side) = if spec.local_size == 0 {
        (Vec::new(), 0)
    } else {
        let le = local_map(&env_c, spec.local_size)?;
        let lt = local_map(&tgt_c, spec.local_size)?;
        (to_f32(&[&le, &lt]), spec.local_size)
    };
    let ge = global_map(&env_c, spec.global_scaling)?;
    let gt = global_map(&tgt_c, spec.global_scaling)?;
    Ok(Observation {
        local_side,
        global_side: ge.side(),
        local,
        global: to_f32(&[&ge, &gt]),
        flying_time,
    })
}

pub fn assemble_observation(state: &EpisodeState, spec: ObservationSpec) -> Result<Observation> {
    observe_layers(
        &state.env().to_layers(),
        &state.target().to_layers(),
        state.position(),
        state.battery(),
        spec,
    )
}

/// Width of the flattened conv features plus the flying-time input.
///
/// Each valid `s_k x s_k` convolution shrinks a spatial side by
/// `2 * floor(s_k / 2)`. A disabled local branch (`l = 0`) contributes
/// nothing.
pub fn flatten_size(
    spec: ObservationSpec,
    map_size: usize,
    n_kernels: usize,
    n_conv: usize,
    kernel_size: usize,
) -> Result<usize> {
    spec.validate(map_size)?;
    let shrink = 2 * n_conv * (kernel_size / 2);
    let branch = |side: usize, what: &str| -> Result<usize> {
        if side <= shrink {
            Err(Error::Infeasible(format!(
                "{what} input {side} leaves no cells after {n_conv} convolutions of size {kernel_size}"
            )))
        } else {
            Ok((side - shrink).pow(2))
        }
    };
    let local = if spec.local_size == 0 {
        0
    } else {
        branch(spec.local_size, "local")?
    };
    let global = branch(spec.global_side(map_size), "global")?;
    Ok(n_kernels * (local + global) + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SimRng;
    use rand::{Rng, SeedableRng};

    fn random_layers(rng: &mut SimRng, channels: usize, side: usize) -> Layers {
        let data = (0..channels * side * side).map(|_| rng.random_range(0..4) as f64).collect();
        Layers::from_vec(channels, side, data).unwrap()
    }

    /// Padded copy: embed the map in a (3M-2)-side canvas of pad values and
    /// read the (2M-1) window whose center is the UAV.
    fn center_oracle(map: &Layers, p: Position, pad: &[f64]) -> Layers {
        let m = map.side();
        let mc = 2 * m - 1;
        let mut out = Layers::zeros(map.channels(), mc);
        for ch in 0..map.channels() {
            for i in 0..mc {
                for j in 0..mc {
                    let si = i as i64 + p.row as i64 - m as i64 + 1;
                    let sj = j as i64 + p.col as i64 - m as i64 + 1;
                    let v = if (0..m as i64).contains(&si) && (0..m as i64).contains(&sj) {
                        map.get(ch, si as usize, sj as usize)
                    } else {
                        pad[ch]
                    };
                    out.set(ch, i, j, v);
                }
            }
        }
        out
    }

    #[test]
    fn one_cell_map_centers_to_itself() {
        let map = Layers::from_vec(2, 1, vec![3.0, 4.0]).unwrap();
        let c = center(&map, Position::new(0, 0), &[9.0, 9.0]).unwrap();
        assert_eq!(c.layers, map);
    }

    #[test]
    fn corner_position_pads_top_left() {
        let map = Layers::from_vec(1, 3, (1..=9).map(f64::from).collect()).unwrap();
        let c = center(&map, Position::new(0, 0), &[-1.0]).unwrap();
        assert_eq!(c.side(), 5);
        for i in 0..5 {
            for j in 0..5 {
                let v = c.layers.get(0, i, j);
                if i < 2 || j < 2 {
                    assert_eq!(v, -1.0);
                } else {
                    assert_eq!(v, map.get(0, i - 2, j - 2));
                }
            }
        }
    }

    #[test]
    fn center_rejects_off_map_position() {
        let map = Layers::zeros(1, 3);
        assert!(matches!(center(&map, Position::new(3, 0), &[0.0]), Err(Error::OffMap { .. })));
    }

    #[test]
    fn center_matches_padded_copy() {
        let mut rng = SimRng::seed_from_u64(1);
        for _ in 0..200 {
            let m = rng.random_range(1..9);
            let map = random_layers(&mut rng, 2, m);
            let p = Position::new(rng.random_range(0..m), rng.random_range(0..m));
            let c = center(&map, p, &[0.5, -2.0]).unwrap();
            assert_eq!(c.layers, center_oracle(&map, p, &[0.5, -2.0]));
            assert_eq!(c.layers.get(0, m - 1, m - 1), map.get(0, p.row, p.col));
        }
    }

    #[test]
    fn local_crop_extremes() {
        let mut rng = SimRng::seed_from_u64(2);
        let map = random_layers(&mut rng, 3, 6);
        let p = Position::new(4, 1);
        let c = center(&map, p, &ENV_PAD).unwrap();
        assert_eq!(local_map(&c, 11).unwrap(), c.layers);
        let one = local_map(&c, 1).unwrap();
        for ch in 0..3 {
            assert_eq!(one.get(ch, 0, 0), map.get(ch, 4, 1));
        }
        assert!(local_map(&c, 12).is_err());
    }

    #[test]
    fn local_crop_on_32_map() {
        let mut rng = SimRng::seed_from_u64(3);
        let map = random_layers(&mut rng, 1, 32);
        let c = center(&map, Position::new(7, 30), &[1.0]).unwrap();
        let crop = local_map(&c, 17).unwrap();
        assert_eq!(crop.side(), 17);
        for i in 0..17 {
            for j in 0..17 {
                assert_eq!(crop.get(0, i, j), c.layers.get(0, i + 32 - 9, j + 32 - 9));
            }
        }
    }

    #[test]
    fn pooling_shapes_and_constants() {
        let map = Layers::filled(32, &[1.0]);
        let c = center(&map, Position::new(5, 5), &[0.0]).unwrap();
        assert_eq!(global_map(&c, 3).unwrap().side(), 21);
        assert_eq!(global_map(&c, 1).unwrap(), c.layers);

        let ones = CenteredMap {
            layers: Layers::filled(4, &[1.0]),
            pad: vec![0.0],
        };
        assert_eq!(global_map(&ones, 2).unwrap(), Layers::filled(2, &[1.0]));
    }

    #[test]
    fn pooling_matches_double_loop() {
        let mut rng = SimRng::seed_from_u64(4);
        let layers = random_layers(&mut rng, 2, 9);
        let c = CenteredMap {
            layers: layers.clone(),
            pad: vec![0.0, 0.0],
        };
        let pooled = global_map(&c, 2).unwrap();
        assert_eq!(pooled.side(), 4);
        for ch in 0..2 {
            for i in 0..4 {
                for j in 0..4 {
                    let s = layers.get(ch, 2 * i, 2 * j)
                        + layers.get(ch, 2 * i + 1, 2 * j)
                        + layers.get(ch, 2 * i, 2 * j + 1)
                        + layers.get(ch, 2 * i + 1, 2 * j + 1);
                    assert_eq!(pooled.get(ch, i, j), s / 4.0);
                }
            }
        }
    }

    #[test]
    fn flatten_sizes() {
        let f = |l, g, m| flatten_size(ObservationSpec::new(l, g), m, 16, 2, 5).unwrap();
        assert_eq!(f(17, 3, 32), 4001);
        assert_eq!(f(9, 7, 32), 33);
        assert_eq!(f(0, 1, 32), 48401);
        assert_eq!(f(17, 5, 50), 3233);
        assert!(matches!(
            flatten_size(ObservationSpec::new(7, 3), 32, 16, 2, 5),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn spec_validation() {
        assert!(ObservationSpec::new(8, 2).validate(32).is_err());
        assert!(ObservationSpec::new(65, 2).validate(32).is_err());
        assert!(ObservationSpec::new(9, 0).validate(32).is_err());
        assert!(ObservationSpec::new(63, 63).validate(32).is_ok());
    }
}
