//! Parsers for the structured flag payloads: parameter triples, weight pairs
//! and grid specifications.

use sortbo::acquisition::CombinedWeights;
use sortbo::point::ParameterPoint;

use crate::CliError;

fn parse_number(text: &str, flag: &str) -> Result<f64, CliError> {
    let value: f64 = text
        .trim()
        .parse()
        .map_err(|_| CliError::Config(format!("{flag}: `{text}` is not a number")))?;
    if !value.is_finite() {
        return Err(CliError::Config(format!("{flag}: `{text}` is not finite")));
    }
    Ok(value)
}

pub fn parse_params(text: &str) -> Result<ParameterPoint, CliError> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 3 {
        return Err(CliError::Config(format!(
            "--params expects three comma-separated values tr,et,se, got `{text}`"
        )));
    }
    let point = ParameterPoint::new(
        parse_number(parts[0], "--params")?,
        parse_number(parts[1], "--params")?,
        parse_number(parts[2], "--params")?,
    );
    if !point.is_valid() {
        return Err(CliError::Config(format!(
            "--params: values must be nonnegative, got `{text}`"
        )));
    }
    Ok(point)
}

pub fn parse_weights(text: &str) -> Result<CombinedWeights, CliError> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 2 {
        return Err(CliError::Config(format!(
            "--weights expects two comma-separated values wa,wr, got `{text}`"
        )));
    }
    let w_accept = parse_number(parts[0], "--weights")?;
    let w_reject = parse_number(parts[1], "--weights")?;
    CombinedWeights::new(w_accept, w_reject).map_err(|_| {
        CliError::Config(format!(
            "weights must be nonnegative and sum to 1, got {w_accept} and {w_reject}"
        ))
    })
}

/// Grid specification: three dimension specs joined by `x`, each either a
/// comma-separated value list or an inclusive `start:stop:step` range.
pub fn parse_grid(text: &str) -> Result<[Vec<f64>; 3], CliError> {
    let dims: Vec<&str> = text.split('x').collect();
    if dims.len() != 3 {
        return Err(CliError::Config(format!(
            "--grid expects three dimension specs joined by `x`, got `{text}`"
        )));
    }
    Ok([parse_dim(dims[0])?, parse_dim(dims[1])?, parse_dim(dims[2])?])
}

fn parse_dim(spec: &str) -> Result<Vec<f64>, CliError> {
    let values = if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(CliError::Config(format!(
                "--grid range `{spec}` must be start:stop:step"
            )));
        }
        let start = parse_number(parts[0], "--grid")?;
        let stop = parse_number(parts[1], "--grid")?;
        let step = parse_number(parts[2], "--grid")?;
        if step <= 0.0 || stop < start {
            return Err(CliError::Config(format!(
                "--grid range `{spec}` must have step > 0 and stop >= start"
            )));
        }
        let mut values = Vec::new();
        let mut k = 0u32;
        loop {
            let value = start + f64::from(k) * step;
            if value > stop + 1e-9 {
                break;
            }
            values.push(value);
            k += 1;
        }
        values
    } else {
        spec.split(',')
            .map(|part| parse_number(part, "--grid"))
            .collect::<Result<Vec<_>, _>>()?
    };
    if values.is_empty() {
        return Err(CliError::Config(format!("--grid dimension `{spec}` is empty")));
    }
    if values.iter().any(|v| *v < 0.0) {
        return Err(CliError::Config(format!(
            "--grid dimension `{spec}` contains negative values"
        )));
    }
    Ok(values)
}

pub fn default_grid() -> [Vec<f64>; 3] {
    [
        (12..=21).map(f64::from).collect(),
        vec![0.0, 2.0, 4.0, 6.0, 8.0],
        vec![0.0, 2.0, 4.0, 6.0, 8.0],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_are_inclusive() {
        let grid = parse_grid("12:21:1x0,8x4").unwrap();
        assert_eq!(grid[0].len(), 10);
        assert_eq!(grid[0][9], 21.0);
        assert_eq!(grid[1], vec![0.0, 8.0]);
        assert_eq!(grid[2], vec![4.0]);
    }

    #[test]
    fn malformed_specs_are_rejected() {
        assert!(parse_grid("12x0").is_err());
        assert!(parse_grid("12:11:1x0x0").is_err());
        assert!(parse_grid("12:13:0x0x0").is_err());
        assert!(parse_params("1,2").is_err());
        assert!(parse_params("1,2,-3").is_err());
        assert!(parse_weights("0.7,0.7").is_err());
    }

    #[test]
    fn default_grid_has_250_points() {
        let [a, b, c] = default_grid();
        assert_eq!(a.len() * b.len() * c.len(), 250);
    }
}
