use std::fs::File;
use std::io::{BufReader, Write};
use std::time::Duration;

use anyhow::{ensure, Context};
use supervisor_core::motor::render_frame;
use supervisor_core::{FrameLog, MotorFrame};
use tokio::time::Instant;

use crate::args::ReplayArgs;

/// Renders each frame at its recorded time (scaled by `--speed`). The last
/// thing drawn is always an all-off frame, also on Ctrl-C.
pub async fn run(args: ReplayArgs) -> anyhow::Result<()> {
    ensure!(
        args.speed.is_finite() && args.speed > 0.0,
        "--speed must be positive"
    );
    let file = File::open(&args.frames)
        .with_context(|| format!("cannot read {}", args.frames.display()))?;
    let log = FrameLog::read_ndjson(BufReader::new(file))
        .with_context(|| args.frames.display().to_string())?;
    let mut out = std::io::stdout().lock();
    let start = Instant::now();
    let mut last: Option<MotorFrame> = None;
    let ctrl_c = tokio::signal::ctrl_c();
    tokio::pin!(ctrl_c);
    for frame in &log.frames {
        if !args.instant {
            let due = start + Duration::from_secs_f64(frame.at_ms as f64 / 1000.0 / args.speed);
            tokio::select! {
                _ = &mut ctrl_c => break,
                _ = tokio::time::sleep_until(due) => {}
            }
        }
        out.write_all(render_frame(frame).as_bytes())?;
        last = Some(*frame);
    }
    if !last.is_some_and(|f| f.is_off()) {
        let at = last.map_or(0, |f| f.at_ms);
        out.write_all(render_frame(&MotorFrame::off(at)).as_bytes())?;
    }
    out.flush()?;
    Ok(())
}
