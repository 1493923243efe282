use std::fmt::Write as _;

use super::{BarrierKind, EventKind, Location, Trace};

/// Renders a trace in normalized text form: one event per line, lowercase
/// hex, no comments. `parse_trace(write_trace(t)) == t` for every trace the
/// parser can produce.
pub fn write_trace(trace: &Trace) -> String {
    let c = trace.config;
    let mut out = format!("config blocks={} warps={} lanes={}\n", c.blocks, c.warps, c.lanes);
    for ev in &trace.events {
        write_event(&mut out, ev).expect("writing to a String cannot fail");
        out.push('\n');
    }
    out
}

fn write_event(out: &mut String, ev: &EventKind) -> std::fmt::Result {
    match ev {
        EventKind::Access { tid, loc, write, atomic, instr } => {
            write!(out, "{tid} {} {}", if *write { "wr" } else { "rd" }, loc_text(loc))?;
            if let Some(s) = atomic {
                write!(out, " atomic {}", s.keyword())?;
            }
            if let Some(n) = instr {
                write!(out, " instr {n}")?;
            }
            Ok(())
        }
        EventKind::Acquire { tid, lock, scope } => write!(out, "{tid} acq {lock:#x} {}", scope.keyword()),
        EventKind::Release { tid, lock, scope } => write!(out, "{tid} rel {lock:#x} {}", scope.keyword()),
        EventKind::Fence { tid, scope } => write!(out, "{tid} fence {}", scope.keyword()),
        EventKind::End { tid } => write!(out, "{tid} end"),
        EventKind::Barrier(BarrierKind::Block { block, arrived }) => {
            write!(out, "bar block {block}")?;
            if let Some(masks) = arrived {
                let list: Vec<String> = masks.iter().map(|m| format!("{m:#x}")).collect();
                write!(out, " {}", list.join(","))?;
            }
            Ok(())
        }
        EventKind::Barrier(BarrierKind::Warp { block, warp, mask }) => {
            write!(out, "bar warp {block} {warp} {mask:#x}")
        }
    }
}

fn loc_text(loc: &Location) -> String {
    loc.to_string()
}

#[cfg(test)]
mod tests {
    use super::super::parse_trace;
    use super::*;

    #[test]
    fn normalized_text_round_trips_bit_exact() {
        let text = "config blocks=2 warps=1 lanes=4\n\
                    0.0.0 wr g:0x10\n\
                    0.0.1 rd s:0x4 atomic block instr 3\n\
                    1.0.0 wr g:0x10 atomic device\n\
                    0.0.2 acq 0xff device\n\
                    0.0.2 rel 0xff device\n\
                    1.0.3 fence block\n\
                    bar warp 1 0 0x9\n\
                    bar block 0\n\
                    bar block 1 0xf\n\
                    0.0.0 end\n";
        let t = parse_trace(text).unwrap();
        assert_eq!(write_trace(&t), text);
    }

    #[test]
    fn coalesced_records_are_written_per_lane() {
        let t = parse_trace("config blocks=1 warps=1 lanes=2\nwacc 0 0 0b11 wr g:0x10,g:0x14 instr 7\n").unwrap();
        assert_eq!(
            write_trace(&t),
            "config blocks=1 warps=1 lanes=2\n0.0.0 wr g:0x10 instr 7\n0.0.1 wr g:0x14 instr 7\n"
        );
    }
}
