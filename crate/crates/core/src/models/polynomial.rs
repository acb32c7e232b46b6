use super::{FamilyClass, Model, ParamSpec, Shape};

const NAMES: [&str; 6] = ["constant", "linear", "quadratic", "cubic", "quartic", "quintic"];

/// `c0 + c1·x + … + c_d·x^d`.
#[derive(Debug, Clone)]
pub struct Polynomial {
    degree: usize,
    name: String,
    params: Vec<ParamSpec>,
}

impl Polynomial {
    pub fn new(degree: usize) -> Self {
        let name = NAMES
            .get(degree)
            .map_or_else(|| format!("poly{degree}"), |s| s.to_string());
        let params = (0..=degree).map(|j| ParamSpec::free(&format!("c{j}"))).collect();
        Polynomial { degree, name, params }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }
}

impl Model for Polynomial {
    fn name(&self) -> &str {
        &self.name
    }

    fn family(&self) -> FamilyClass {
        FamilyClass::Polynomial
    }

    fn params(&self) -> &[ParamSpec] {
        &self.params
    }

    fn eval(&self, p: &[f64], x: f64) -> f64 {
        p.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    fn grad(&self, _p: &[f64], x: f64, out: &mut [f64]) {
        let mut xp = 1.0;
        for g in out.iter_mut() {
            *g = xp;
            xp *= x;
        }
    }

    fn dydx(&self, p: &[f64], x: f64) -> Option<f64> {
        Some(
            p.iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (j, c)| acc * x + j as f64 * c),
        )
    }

    fn guess(&self, s: &Shape) -> Vec<f64> {
        let d = self.degree;
        s.fit_basis(|x| (0..=d).map(|j| x.powi(j as i32)).collect())
            .unwrap_or_else(|| {
                let mut v = vec![0.0; d + 1];
                v[0] = s.y_mean;
                v
            })
    }
}
