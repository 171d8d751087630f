//! Grid specifications for the sweep subcommands.

/// One axis of a parameter sweep: inclusive endpoints, fixed step count,
/// linear or log spacing.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub steps: usize,
    pub log: bool,
}

impl GridSpec {
    /// Parses `name=min:max:steps` or `name=log:min:max:steps`.
    pub fn parse(text: &str) -> Result<Self, String> {
        let (name, rest) = text
            .split_once('=')
            .ok_or_else(|| format!("grid axis `{text}` is not of the form name=min:max:steps"))?;
        let parts: Vec<&str> = rest.split(':').collect();
        let (log, nums) = match parts.as_slice() {
            [a, b, c] => (false, [*a, *b, *c]),
            ["log", a, b, c] => (true, [*a, *b, *c]),
            _ => {
                return Err(format!(
                    "grid axis `{text}` must be name=min:max:steps or name=log:min:max:steps"
                ))
            }
        };
        let min: f64 = nums[0]
            .parse()
            .map_err(|_| format!("bad grid minimum `{}`", nums[0]))?;
        let max: f64 = nums[1]
            .parse()
            .map_err(|_| format!("bad grid maximum `{}`", nums[1]))?;
        let steps: usize = nums[2]
            .parse()
            .map_err(|_| format!("bad grid step count `{}`", nums[2]))?;
        if !min.is_finite() || !max.is_finite() || min <= 0.0 || max <= min {
            return Err(format!("grid `{text}` needs 0 < min < max"));
        }
        if steps < 2 {
            return Err(format!("grid `{text}` needs at least 2 steps"));
        }
        Ok(Self {
            name: name.to_string(),
            min,
            max,
            steps,
            log,
        })
    }

    pub fn values(&self) -> Vec<f64> {
        let n = self.steps;
        (0..n)
            .map(|k| {
                let f = k as f64 / (n - 1) as f64;
                if self.log {
                    (self.min.ln() + (self.max.ln() - self.min.ln()) * f).exp()
                } else {
                    self.min + (self.max - self.min) * f
                }
            })
            .collect()
    }
}

/// The `(lambda, sigma_mu)` sweep used by the grid subcommands.
#[derive(Debug, Clone)]
pub struct TrendGrid {
    pub lambda: GridSpec,
    pub sigma_mu: GridSpec,
}

impl TrendGrid {
    /// Parses `lambda=...,sigma_mu=...` (either order).
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut lambda = None;
        let mut sigma_mu = None;
        for part in text.split(',') {
            let axis = GridSpec::parse(part)?;
            match axis.name.as_str() {
                "lambda" => lambda = Some(axis),
                "sigma_mu" => sigma_mu = Some(axis),
                other => return Err(format!("unknown grid axis `{other}`")),
            }
        }
        Ok(Self {
            lambda: lambda.ok_or("grid is missing the lambda axis")?,
            sigma_mu: sigma_mu.ok_or("grid is missing the sigma_mu axis")?,
        })
    }

    /// Row-major cells, lambda outer, both axes ascending; the output order
    /// never depends on how the work is scheduled.
    pub fn cells(&self) -> Vec<(f64, f64)> {
        let sigmas = self.sigma_mu.values();
        self.lambda
            .values()
            .into_iter()
            .flat_map(|l| sigmas.iter().map(move |s| (l, *s)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_linear_axis() {
        let g = GridSpec::parse("lambda=0.5:5:10").unwrap();
        assert_eq!(g.steps, 10);
        let v = g.values();
        assert_eq!(v.len(), 10);
        assert_eq!(v[0], 0.5);
        assert_eq!(*v.last().unwrap(), 5.0);
        assert!(v.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn parses_log_axis() {
        let g = GridSpec::parse("sigma_mu=log:0.01:1:5").unwrap();
        assert!(g.log);
        let v = g.values();
        assert!((v[0] - 0.01).abs() < 1e-15);
        assert!((v[4] - 1.0).abs() < 1e-15);
        assert!((v[2] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_axes() {
        assert!(GridSpec::parse("lambda=5:0.5:10").is_err());
        assert!(GridSpec::parse("lambda=0:1:10").is_err());
        assert!(GridSpec::parse("lambda=0.5:5:1").is_err());
        assert!(GridSpec::parse("lambda=0.5:5").is_err());
        assert!(TrendGrid::parse("lambda=0.5:5:10").is_err());
        assert!(TrendGrid::parse("lambda=0.5:5:10,volatility=0.1:1:5").is_err());
    }

    #[test]
    fn cells_are_lambda_major() {
        let grid = TrendGrid::parse("lambda=1:2:2,sigma_mu=0.1:0.3:3").unwrap();
        let cells = grid.cells();
        assert_eq!(cells.len(), 6);
        assert_eq!(cells[0], (1.0, 0.1));
        assert_eq!(cells[2], (1.0, 0.3));
        assert_eq!(cells[3], (2.0, 0.1));
    }
}
