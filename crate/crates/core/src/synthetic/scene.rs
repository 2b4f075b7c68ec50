use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoders::RawImage;
use crate::error::{Error, Result};

/// Default grid side; each cell renders as a 2×2 pixel patch.
pub const GRID: usize = 4;
const CELL_PX: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Shape {
    Square,
    Circle,
    Triangle,
}

impl Shape {
    pub const ALL: [Shape; 3] = [Shape::Square, Shape::Circle, Shape::Triangle];

    pub fn word(self) -> &'static str {
        match self {
            Shape::Square => "square",
            Shape::Circle => "circle",
            Shape::Triangle => "triangle",
        }
    }

    pub fn from_word(w: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.word() == w)
    }

    /// Lit pixels within a cell, as `(dy, dx)`. Every glyph is 4-connected
    /// and the three glyphs differ in pixel count.
    pub fn glyph(self) -> &'static [(usize, usize)] {
        match self {
            Shape::Square => &[(0, 0), (0, 1), (1, 0), (1, 1)],
            Shape::Triangle => &[(0, 0), (1, 0), (1, 1)],
            Shape::Circle => &[(0, 0), (0, 1)],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Color {
    Red,
    Green,
    Blue,
    Yellow,
}

impl Color {
    pub const ALL: [Color; 4] = [Color::Red, Color::Green, Color::Blue, Color::Yellow];

    pub fn word(self) -> &'static str {
        match self {
            Color::Red => "red",
            Color::Green => "green",
            Color::Blue => "blue",
            Color::Yellow => "yellow",
        }
    }

    pub fn from_word(w: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.word() == w)
    }

    pub fn rgb(self) -> [f32; 3] {
        match self {
            Color::Red => [1.0, 0.0, 0.0],
            Color::Green => [0.0, 1.0, 0.0],
            Color::Blue => [0.0, 0.0, 1.0],
            Color::Yellow => [1.0, 1.0, 0.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Object {
    pub shape: Shape,
    pub color: Color,
    /// Row-major cell index, `row * grid + col`.
    pub cell: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneSpec {
    pub grid: usize,
    pub min_objects: usize,
    pub max_objects: usize,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            grid: GRID,
            min_objects: 1,
            max_objects: 4,
        }
    }
}

impl SceneSpec {
    /// Objects never share an edge, so at most `ceil(g²/2)` fit.
    pub fn capacity(&self) -> usize {
        (self.grid * self.grid).div_ceil(2)
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid == 0 || self.grid * CELL_PX > 64 {
            return Err(Error::InfeasibleScene(format!("grid size {}", self.grid)));
        }
        if self.min_objects > self.max_objects {
            return Err(Error::InfeasibleScene(format!(
                "object range [{}, {}] is empty",
                self.min_objects, self.max_objects
            )));
        }
        if self.max_objects > self.capacity() {
            return Err(Error::InfeasibleScene(format!(
                "{} objects do not fit a {}x{} grid without touching (max {})",
                self.max_objects,
                self.grid,
                self.grid,
                self.capacity()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub grid: usize,
    pub objects: Vec<Object>,
    pub image: RawImage,
}

impl Scene {
    pub fn count(&self, shape: Shape) -> usize {
        self.objects.iter().filter(|o| o.shape == shape).count()
    }

    pub fn contains(&self, color: Color, shape: Shape) -> bool {
        self.objects
            .iter()
            .any(|o| o.color == color && o.shape == shape)
    }
}

fn adjacent(a: usize, b: usize, grid: usize) -> bool {
    let (ar, ac) = (a / grid, a % grid);
    let (br, bc) = (b / grid, b % grid);
    ar.abs_diff(br) + ac.abs_diff(bc) == 1
}

/// Picks `k` cells from `allowed` such that no two chosen cells (nor any
/// chosen cell and a cell in `taken`) share an edge. Searches in a random
/// order, so the result is uniform-ish and always found when one exists.
pub(crate) fn place(
    rng: &mut impl Rng,
    allowed: &[usize],
    taken: &[usize],
    k: usize,
    grid: usize,
) -> Option<Vec<usize>> {
    let mut order: Vec<usize> = allowed
        .iter()
        .copied()
        .filter(|&c| !taken.iter().any(|&t| t == c || adjacent(t, c, grid)))
        .collect();
    order.shuffle(rng);
    let mut chosen = Vec::with_capacity(k);
    fn search(order: &[usize], k: usize, grid: usize, chosen: &mut Vec<usize>) -> bool {
        if chosen.len() == k {
            return true;
        }
        for (i, &c) in order.iter().enumerate() {
            if order.len() - i < k - chosen.len() {
                return false;
            }
            if chosen.iter().any(|&x| adjacent(x, c, grid)) {
                continue;
            }
            chosen.push(c);
            if search(&order[i + 1..], k, grid, chosen) {
                return true;
            }
            chosen.pop();
        }
        false
    }
    search(&order, k, grid, &mut chosen).then_some(chosen)
}

/// Renders objects onto a black `2g×2g` canvas.
pub fn render(objects: &[Object], grid: usize) -> RawImage {
    let side = grid * CELL_PX;
    let mut img = RawImage::new(side, side, vec![0.0; side * side * 3])
        .expect("canvas dimensions are consistent");
    for o in objects {
        let (r, c) = (o.cell / grid, o.cell % grid);
        for &(dy, dx) in o.shape.glyph() {
            img.set_pixel(r * CELL_PX + dy, c * CELL_PX + dx, o.color.rgb());
        }
    }
    img
}

pub fn generate_scene(seed: u64, spec: &SceneSpec) -> Result<Scene> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = rng.random_range(spec.min_objects..=spec.max_objects);
    let cells: Vec<usize> = (0..spec.grid * spec.grid).collect();
    let chosen = place(&mut rng, &cells, &[], k, spec.grid)
        .ok_or_else(|| Error::InfeasibleScene(format!("could not place {k} objects")))?;
    let mut objects: Vec<Object> = chosen
        .into_iter()
        .map(|cell| Object {
            shape: Shape::ALL[rng.random_range(0..Shape::ALL.len())],
            color: Color::ALL[rng.random_range(0..Color::ALL.len())],
            cell,
        })
        .collect();
    objects.sort_by_key(|o| o.cell);
    let image = render(&objects, spec.grid);
    Ok(Scene {
        grid: spec.grid,
        objects,
        image,
    })
}
