use std::fmt::Write;

use base64::Engine;
use dfm::io::{load_image, read_matches};
use dfm::{ImageBuffer, PixelMatch};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::args::VizArgs;
use crate::output::{encode_image, require_file, write_atomic};
use crate::{CliError, CliResult};

/// At most `max` matches picked uniformly without replacement, in their
/// original order.
pub fn subsample(matches: &[PixelMatch], max: Option<usize>, seed: u64) -> Vec<PixelMatch> {
    match max {
        Some(k) if k < matches.len() => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut idx = rand::seq::index::sample(&mut rng, matches.len(), k).into_vec();
            idx.sort_unstable();
            idx.into_iter().map(|i| matches[i]).collect()
        }
        _ => matches.to_vec(),
    }
}

fn data_uri(img: &ImageBuffer) -> CliResult<String> {
    let png = encode_image(img, std::path::Path::new("x.png"))?;
    Ok(format!(
        "data:image/png;base64,{}",
        base64::engine::general_purpose::STANDARD.encode(png)
    ))
}

/// Both images side by side, B to the right of A, with one line per match
/// between pixel centres.
pub fn render(a: &ImageBuffer, b: &ImageBuffer, lines: &[PixelMatch]) -> CliResult<String> {
    let (wa, wb) = (a.width(), b.width());
    let (width, height) = (wa + wb, a.height().max(b.height()));
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(
        svg,
        r#"<image x="0" y="0" width="{wa}" height="{}" href="{}"/>"#,
        a.height(),
        data_uri(a)?
    );
    let _ = writeln!(
        svg,
        r#"<image x="{wa}" y="0" width="{wb}" height="{}" href="{}"/>"#,
        b.height(),
        data_uri(b)?
    );
    let _ = writeln!(svg, r#"<g stroke-width="1" stroke-opacity="0.8">"#);
    for (i, m) in lines.iter().enumerate() {
        let hue = (i as f64 * 137.508) % 360.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="hsl({hue:.0},90%,50%)"/>"#,
            m.xa + 0.5,
            m.ya + 0.5,
            m.xb + 0.5 + wa as f64,
            m.yb + 0.5
        );
    }
    svg.push_str("</g>\n</svg>\n");
    Ok(svg)
}

pub fn run(args: &VizArgs) -> CliResult<()> {
    require_file("--image-a", &args.image_a)?;
    require_file("--image-b", &args.image_b)?;
    require_file("--matches", &args.matches)?;
    if args.out.extension().is_none_or(|e| e != "svg") {
        return Err(CliError::Usage(format!(
            "--out must end in .svg, got {}",
            args.out.display()
        )));
    }
    let matches = read_matches(&args.matches)?;
    let a = load_image(&args.image_a)?;
    let b = load_image(&args.image_b)?;
    let lines = subsample(&matches, args.max_lines, args.seed);
    write_atomic(&args.out, render(&a, &b, &lines)?.as_bytes())?;
    println!("{} of {} matches drawn", lines.len(), matches.len());
    Ok(())
}
