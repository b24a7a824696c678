//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

// `ensure!` negates its condition so NaN fails.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::f64::consts::{PI, TAU};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use puppetai_core::actuation::codec::{crc8, decode_frame, encode_frame, Payload};
use puppetai_core::actuation::{
    evaluate_sinusoid, phase_shifted_bank, MotorChannelConfig, MotorCommand, SimBackend, SinusoidSpec,
};
use puppetai_core::config::AppConfig;
use puppetai_core::dsl::{
    build_schedule, compile_sequence, format_sequence, parse_sequence, ActionSequence, RepairNote, ResolveMode,
    SchedulerState, SchedulerStatus, SequenceItem,
};
use puppetai_core::gestures::{builtin_library, GestureKind, IdleSway};
use puppetai_core::kinematics::{
    cable_displacement, forward_kinematics, unit_arc_transform, BendPlane, BendState, PlaneKey, PuppetModel,
    SegmentSpec,
};
use puppetai_core::orchestrator::{
    make_backend, run_session, LogSink, Orchestrator, Phase, Script, SharedBuffer, SimOptions,
};
use puppetai_core::perception::stub::StubChatServer;
use puppetai_core::perception::{llm_respond_with_token, mock_transcribe, rule_respond, LlmClientConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

const SCENARIOS: &str = include_str!("../../../configs/scripts/scenarios.json");

fn plane(id: &str, orientation_deg: f64, r: f64, range: [f64; 2]) -> BendPlane {
    BendPlane {
        plane_id: id.into(),
        orientation_deg,
        cable_offset_mm: r,
        active_range: range,
        elastic_return: false,
    }
}

fn geometry() -> Outcome {
    let model = PuppetModel::demo();
    let arm = &model.section("left_arm").unwrap().segments[0];
    let body = &model.section("body").unwrap().segments[0];
    ensure!(arm.max_bend_deg() == 150.0, "arm max bend {}", arm.max_bend_deg());
    ensure!(arm.total_length_mm() == 158.0, "arm length {}", arm.total_length_mm());
    ensure!(body.max_bend_deg() == 45.0, "body max bend {}", body.max_bend_deg());
    ensure!(body.flex_length_mm == 100.0, "body flex {}", body.flex_length_mm);
    let right = &model.section("right_arm").unwrap().segments[0];
    ensure!(right == arm || right.max_bend_deg() == 150.0, "right arm differs");
    Ok("arm 150 deg / 158 mm, body 45 deg / 100 mm".into())
}

/// Planar circular arc of length `l` and total bend `theta` seen from its base.
fn closed_form(l: f64, theta: f64, orientation: f64) -> [f64; 3] {
    let x = l * (1.0 - theta.cos()) / theta;
    let z = l * theta.sin() / theta;
    [x * orientation.cos(), x * orientation.sin(), z]
}

fn fk_oracle() -> Outcome {
    let start = Instant::now();
    let l = 122.0;
    let mut worst: f64 = 0.0;
    for orientation_deg in [0.0, 90.0, 225.0] {
        let p = plane("p", orientation_deg, 8.0, [0.0, 180.0]);
        for n in 1..=100u32 {
            for deg in 1..=170 {
                let theta = f64::from(deg);
                let unit = unit_arc_transform(l / f64::from(n), theta / f64::from(n), &p);
                let mut tip = unit;
                for _ in 1..n {
                    tip = tip * unit;
                }
                let want = closed_form(l, theta.to_radians(), f64::to_radians(orientation_deg));
                for (a, b) in tip.position_mm.iter().zip(want) {
                    worst = worst.max((a - b).abs());
                }
            }
        }
    }
    ensure!(worst <= 1e-6, "max position error {worst:e} mm");

    let model = PuppetModel::demo();
    let frames = forward_kinematics(&model, &BendState::zero(&model)).map_err(|e| e.to_string())?;
    let mut worst_rel: f64 = 0.0;
    for section in &model.sections {
        let f = &frames[&section.name];
        let (root, tip) = (f[0], *f.last().unwrap());
        let length = section.total_length_mm();
        let local = root.inverse() * tip;
        let off_axis = local.position_mm.x.hypot(local.position_mm.y);
        worst_rel = worst_rel
            .max(off_axis / length)
            .max((local.position_mm.z - length).abs() / length);
    }
    ensure!(worst_rel <= 1e-9, "zero-bend straightness {worst_rel:e}");
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(5), "took {elapsed:?}");
    Ok(format!(
        "max error {worst:.2e} mm, straightness {worst_rel:.1e}, {elapsed:.2?}"
    ))
}

fn cable_mapping() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let r = rng.gen_range(0.5..20.0);
        let n = rng.gen_range(1..=12u32);
        let unit_angle = rng.gen_range(5.0..40.0);
        let seg = SegmentSpec::new(
            100.0,
            0.0,
            n,
            unit_angle,
            vec![plane("p", 0.0, r, [0.0, f64::from(n) * unit_angle])],
        )
        .unwrap();
        let theta = rng.gen_range(0.0..=seg.max_bend_deg());
        let got = cable_displacement(&seg, "p", theta).map_err(|e| e.to_string())?;
        let per_unit = (theta / f64::from(n)).to_radians();
        let oracle: f64 = (0..n).map(|_| r * per_unit).sum();
        worst = worst.max((got - oracle).abs());

        let mut angles: Vec<f64> = (0..20).map(|_| rng.gen_range(0.0..=seg.max_bend_deg())).collect();
        angles.sort_by(f64::total_cmp);
        let values: Vec<f64> = angles
            .iter()
            .map(|a| cable_displacement(&seg, "p", *a).unwrap())
            .collect();
        ensure!(values.windows(2).all(|w| w[0] <= w[1]), "not monotone for r={r} n={n}");
    }
    ensure!(worst <= 1e-9, "max deviation {worst:e}");
    Ok(format!("1000 cases, max deviation {worst:.1e} mm, monotone"))
}

fn random_name(rng: &mut ChaCha8Rng) -> String {
    const FIRST: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz";
    const REST: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789_";
    let len = rng.gen_range(0..12);
    let mut s = String::new();
    s.push(FIRST[rng.gen_range(0..FIRST.len())] as char);
    for _ in 0..len {
        s.push(REST[rng.gen_range(0..REST.len())] as char);
    }
    s
}

fn random_number(rng: &mut ChaCha8Rng) -> f64 {
    match rng.gen_range(0..3) {
        0 => f64::from(rng.gen_range(0..20u32)),
        1 => f64::from(rng.gen_range(0..10_000u32)) / 100.0,
        _ => rng.gen_range(0.0..1000.0),
    }
}

const FUZZ_ALPHABET: &[char] = &[
    '[', ']', '[', ']', '0', '1', '9', '.', '-', 'e', 'J', 'o', 'y', ' ', '\n', 'é', '💥', '\0',
];

fn fuzz_char(rng: &mut ChaCha8Rng) -> char {
    if rng.gen_bool(0.1) {
        char::from_u32(rng.gen_range(0..0x3000)).unwrap_or('?')
    } else {
        FUZZ_ALPHABET[rng.gen_range(0..FUZZ_ALPHABET.len())]
    }
}

/// Random noise half the time, otherwise a valid sequence with a few edits.
fn fuzz_input(rng: &mut ChaCha8Rng) -> String {
    if rng.gen_bool(0.5) {
        let len = rng.gen_range(0..40);
        return (0..len).map(|_| fuzz_char(rng)).collect();
    }
    let items: Vec<SequenceItem> = (0..rng.gen_range(1..4))
        .map(|_| SequenceItem::new(random_name(rng), random_number(rng)))
        .collect();
    let mut chars: Vec<char> = format_sequence(&ActionSequence::from_items(items)).chars().collect();
    for _ in 0..rng.gen_range(0..3) {
        let at = rng.gen_range(0..=chars.len());
        match rng.gen_range(0..3) {
            0 => chars.insert(at, fuzz_char(rng)),
            1 if at < chars.len() => {
                chars.remove(at);
            }
            _ if at < chars.len() => chars[at] = fuzz_char(rng),
            _ => {}
        }
    }
    chars.into_iter().collect()
}

fn dsl() -> Outcome {
    let expected: [(&str, &[(&str, f64)]); 4] = [
        ("[Waving][1][Joy][1]", &[("Waving", 1.0), ("Joy", 1.0)]),
        ("[Joy][1][Dancing][3]", &[("Joy", 1.0), ("Dancing", 3.0)]),
        ("[Sadness][1][Hug][3]", &[("Sadness", 1.0), ("Hug", 3.0)]),
        ("[Confusion][1]", &[("Confusion", 1.0)]),
    ];
    for (text, items) in expected {
        let seq = parse_sequence(text).map_err(|e| format!("{text}: {e}"))?;
        let got: Vec<(&str, f64)> = seq
            .items
            .iter()
            .map(|i| (i.gesture_name.as_str(), i.number_s))
            .collect();
        ensure!(got == items, "{text} parsed to {got:?}");
    }

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..1000 {
        let items: Vec<SequenceItem> = (0..rng.gen_range(1..8))
            .map(|_| SequenceItem::new(random_name(&mut rng), random_number(&mut rng)))
            .collect();
        let text = format_sequence(&ActionSequence::from_items(items.clone()));
        let back = parse_sequence(&text).map_err(|e| format!("{text}: {e}"))?;
        ensure!(back.items == items, "round trip changed {text}");
        ensure!(format_sequence(&back) == text, "format not stable for {text}");
    }

    let mut accepted = 0;
    for _ in 0..100_000 {
        let input = fuzz_input(&mut rng);
        let result = catch_unwind(|| parse_sequence(&input));
        let parsed = result.map_err(|_| format!("parser panicked on {input:?}"))?;
        if let Ok(seq) = parsed {
            accepted += 1;
            let again = parse_sequence(&format_sequence(&seq)).map_err(|e| format!("{input:?}: {e}"))?;
            ensure!(again.items == seq.items, "reparse differs for {input:?}");
        }
    }
    Ok(format!(
        "4 examples exact, 1000 round trips, 100000 fuzz cases ({accepted} accepted)"
    ))
}

fn scenario_loop() -> Outcome {
    let start = Instant::now();
    let config = AppConfig::demo();
    let script = Script::from_json(SCENARIOS).map_err(|e| e.to_string())?;
    let out = run_session(&config, &script, None, SimOptions::default()).map_err(|e| e.to_string())?;
    let got: Vec<&str> = out.report.sequences.iter().map(|s| s.sequence.as_str()).collect();
    let want = [
        "[Waving][1][Joy][1]",
        "[Joy][1][Dancing][3]",
        "[Sadness][1][Hug][3]",
        "[Confusion][1]",
    ];
    ensure!(got == want, "executed {got:?}");
    ensure!(
        out.report.sequences.iter().all(|s| s.repairs.is_empty()),
        "unexpected repairs"
    );
    ensure!(
        out.report.rejections.is_empty() && out.report.faults.is_empty(),
        "rejections or faults"
    );
    ensure!(
        out.report.final_phase == Phase::Idle,
        "ended in {:?}",
        out.report.final_phase
    );
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
    Ok(format!("4 scenarios over {} ticks in {elapsed:.2?}", out.report.ticks))
}

fn scheduler_timing() -> Outcome {
    let model = PuppetModel::demo();
    let lib = builtin_library(&model).map_err(|e| e.to_string())?;
    let names = ["Waving", "Joy", "Sadness", "Hug", "Confusion", "Dancing"];
    let dt = 0.02;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut off_by_one = 0;
    for _ in 0..100 {
        let mut text = String::new();
        let mut analytic = 0.0;
        for _ in 0..rng.gen_range(1..5) {
            let name = names[rng.gen_range(0..names.len())];
            let number = f64::from(rng.gen_range(0..400u32)) / 100.0;
            text.push_str(&format!("[{name}][{number}]"));
            let def = lib.get(name).unwrap();
            analytic += match def.kind {
                GestureKind::Discrete => def.nominal_duration_s + number,
                GestureKind::Continuous => number,
            };
        }
        let seq = compile_sequence(&text, &lib, ResolveMode::Strict).map_err(|e| format!("{text}: {e}"))?;
        let mut s = SchedulerState::new();
        s.install(build_schedule(&seq));
        let mut ticks: i64 = 0;
        while s.status() != SchedulerStatus::Done {
            s.tick(&lib, &model, dt);
            ticks += 1;
            ensure!(ticks < 1_000_000, "{text} never finished");
        }
        let expected = (analytic / dt).ceil() as i64;
        ensure!(
            (ticks - expected).abs() <= 1,
            "{text}: {ticks} ticks, expected {expected}"
        );
        off_by_one += i32::from(ticks != expected);
    }
    Ok(format!("100 schedules within one tick ({off_by_one} off by one)"))
}

fn gesture_safety() -> Outcome {
    let model = PuppetModel::demo();
    let lib = builtin_library(&model).map_err(|e| e.to_string())?;
    let mut samples = 0;
    for name in ["Waving", "Joy", "Sadness", "Hug", "Confusion", "Dancing"] {
        let def = lib.get(name).ok_or_else(|| format!("{name} missing"))?;
        let traj = lib
            .compile(name, &model, 50.0)
            .unwrap()
            .map_err(|e| format!("{name}: {e}"))?;
        for (k, pose) in traj.samples.iter().enumerate() {
            pose.validate(&model).map_err(|e| format!("{name} sample {k}: {e}"))?;
        }
        samples += traj.len();
        if def.kind == GestureKind::Continuous {
            ensure!(traj.first() == traj.last(), "{name} does not close its loop");
        }
    }
    let spec = lib.idle().cloned().ok_or("no idle spec")?;
    let key: PlaneKey = spec.plane.clone();
    let neutral = lib.neutral_pose(&model);
    for seed in 0..20 {
        let mut sway = IdleSway::new(spec.clone(), seed);
        for k in 0..30_000 {
            let pose = sway.pose(f64::from(k) * 0.02, &neutral);
            pose.validate(&model)
                .map_err(|e| format!("idle seed {seed} tick {k} {key}: {e}"))?;
        }
        samples += 30_000;
    }
    Ok(format!("{samples} samples within limits, loops closed"))
}

fn actuation() -> Outcome {
    // phase relation
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let base = SinusoidSpec {
            amplitude_mm: rng.gen_range(0.1..10.0),
            freq_hz: rng.gen_range(0.1..2.0),
            phase_rad: 0.0,
            offset_mm: rng.gen_range(-3.0..3.0),
        };
        let bank = phase_shifted_bank(base, 6, rng.gen_range(0.0..PI));
        let t = rng.gen_range(0.0..10.0);
        for spec in &bank {
            let shifted = evaluate_sinusoid(spec, t);
            let reference = evaluate_sinusoid(&base, t + spec.phase_rad / (TAU * base.freq_hz));
            worst = worst.max((shifted - reference).abs());
        }
    }
    ensure!(worst <= 1e-12, "phase identity error {worst:e}");

    // rate limit
    let channels: Vec<MotorChannelConfig> = (1..=4)
        .map(|id| MotorChannelConfig {
            velocity_limit_mm_s: f64::from(id) * 50.0,
            torque_limit: 1e9,
            ..MotorChannelConfig::demo(id, PlaneKey::new("body", "lateral"))
        })
        .collect();
    let mut sim = SimBackend::new(&channels);
    let mut prev: Vec<f64> = sim.telemetry().iter().map(|t| t.position_mm).collect();
    for step in 0..100_000 {
        let dt = rng.gen_range(0.001..0.05);
        let mut commands = Vec::new();
        for c in &channels {
            if rng.gen_bool(0.3) {
                commands.push(MotorCommand {
                    channel_id: c.channel_id,
                    target_displacement_mm: rng.gen_range(-25.0..25.0),
                });
            }
        }
        let report = sim.step(&commands, dt).map_err(|e| e.to_string())?;
        for ((t, p), c) in report.telemetry.iter().zip(&prev).zip(&channels) {
            let moved = (t.position_mm - p).abs();
            ensure!(
                moved <= c.velocity_limit_mm_s * dt + 1e-12,
                "step {step} channel {} moved {moved}",
                c.channel_id
            );
        }
        prev = report.telemetry.iter().map(|t| t.position_mm).collect();
    }

    // fault latches on the tick it is detected
    let mut cfg = AppConfig::demo();
    for ch in &mut cfg.channels {
        ch.torque_limit = 0.05;
    }
    let log = SharedBuffer::new();
    let mut orch = Orchestrator::new(
        &cfg,
        make_backend(&cfg).map_err(|e| e.to_string())?,
        Some(Box::new(log.clone())),
    );
    let seq = compile_sequence("[Joy][1]", &cfg.library, ResolveMode::Strict).map_err(|e| e.to_string())?;
    orch.play("[Joy][1]", seq);
    let mut fault_tick = None;
    for _ in 0..200 {
        let out = orch.control_tick().map_err(|e| e.to_string())?;
        if let Some(f) = orch.report().faults.first() {
            ensure!(f.tick == out.tick, "fault recorded late");
            ensure!(
                out.telemetry.iter().any(|t| t.channel_id == f.channel && t.faulted),
                "telemetry not latched on detection tick"
            );
            fault_tick = Some(out.tick);
            break;
        }
    }
    let fault_tick = fault_tick.ok_or("no fault raised")?;
    let held = orch.control_tick().map_err(|e| e.to_string())?;
    ensure!(
        orch.phase() == Phase::Faulted,
        "phase {:?} one tick after fault",
        orch.phase()
    );
    let frozen: Vec<f64> = held
        .telemetry
        .iter()
        .filter(|t| t.faulted)
        .map(|t| t.position_mm)
        .collect();
    for _ in 0..50 {
        let out = orch.control_tick().map_err(|e| e.to_string())?;
        let now: Vec<f64> = out
            .telemetry
            .iter()
            .filter(|t| t.faulted)
            .map(|t| t.position_mm)
            .collect();
        ensure!(now == frozen, "faulted channel moved");
    }

    // identical seeded runs
    let script = Script::from_json(SCENARIOS).map_err(|e| e.to_string())?;
    let run = || -> Result<Vec<u8>, String> {
        let buf = SharedBuffer::new();
        let sink: LogSink = Box::new(buf.clone());
        let opts = SimOptions {
            collect_transcript: false,
            ..SimOptions::default()
        };
        run_session(&AppConfig::demo(), &script, Some(sink), opts).map_err(|e| e.to_string())?;
        Ok(buf.contents())
    };
    let (a, b) = (run()?, run()?);
    ensure!(!a.is_empty() && a == b, "logs differ");
    Ok(format!(
        "phase error {worst:.1e}, 100000 rate-limited steps, fault latched at tick {fault_tick}, {} identical log bytes",
        a.len()
    ))
}

fn codec() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for i in 0..10_000 {
        let payload = match i % 4 {
            0 => Payload::SetTarget { target_um: rng.gen() },
            1 => Payload::Query,
            2 => Payload::Stop,
            _ => Payload::Telemetry {
                position_um: rng.gen(),
                velocity_um_s: rng.gen(),
                torque_milli: rng.gen(),
                faulted: rng.gen(),
            },
        };
        let channel: u8 = rng.gen();
        let frame = encode_frame(channel, &payload);
        let packet = decode_frame(&frame).map_err(|e| format!("{payload:?}: {e}"))?;
        ensure!(
            packet.channel == channel && packet.payload == payload,
            "round trip changed {payload:?}"
        );
    }

    let reference = encode_frame(1, &Payload::SetTarget { target_um: 10_000 });
    ensure!(
        reference == [0xAA, 0x55, 0x01, 0x01, 0x10, 0x27, 0x00, 0x00, 0x79],
        "reference frame {reference:02X?}"
    );
    ensure!(
        crc8_bitwise(&reference[2..8]) == reference[8],
        "table CRC disagrees with bitwise CRC"
    );
    ensure!(crc8(&reference[2..8]) == 0x79, "crc8 table");
    let mut rejected = 0;
    for byte in 0..reference.len() {
        for bit in 0..8 {
            let mut corrupt = reference.clone();
            corrupt[byte] ^= 1 << bit;
            ensure!(decode_frame(&corrupt).is_err(), "flip byte {byte} bit {bit} accepted");
            rejected += 1;
        }
    }
    Ok(format!(
        "10000 round trips, {rejected}/72 single-bit flips rejected, reference frame exact"
    ))
}

/// Bit-at-a-time CRC-8, polynomial 0x07, init 0.
fn crc8_bitwise(bytes: &[u8]) -> u8 {
    let mut crc = 0u8;
    for &b in bytes {
        crc ^= b;
        for _ in 0..8 {
            crc = if crc & 0x80 != 0 { (crc << 1) ^ 0x07 } else { crc << 1 };
        }
    }
    crc
}

fn llm_path() -> Outcome {
    let model = PuppetModel::demo();
    let lib = builtin_library(&model).map_err(|e| e.to_string())?;
    let percept = mock_transcribe("Hi, how are you today?");

    let stub = StubChatServer::start(vec!["Sure! [Waving][".into(), "[Waving][1][Joy][1]".into()]);
    let cfg = LlmClientConfig {
        endpoint_url: stub.url(),
        ..LlmClientConfig::default()
    };
    let out = llm_respond_with_token(&percept, &lib, &cfg, Some("test-token"));
    ensure!(
        out.sequence.to_text() == "[Waving][1][Joy][1]",
        "got {}",
        out.sequence.to_text()
    );
    ensure!(out.repairs.len() == 1, "repairs {:?}", out.repairs);
    ensure!(
        matches!(out.repairs[0], RepairNote::Retried { attempt: 1, .. }),
        "repair {:?}",
        out.repairs[0]
    );
    ensure!(stub.requests().len() == 2, "{} requests", stub.requests().len());

    let dead = {
        let listener = std::net::TcpListener::bind("127.0.0.1:0").map_err(|e| e.to_string())?;
        let addr = listener.local_addr().map_err(|e| e.to_string())?;
        drop(listener);
        format!("http://{addr}/v1/chat")
    };
    let cfg = LlmClientConfig {
        endpoint_url: dead,
        timeout_ms: 1000,
        ..LlmClientConfig::default()
    };
    let out = llm_respond_with_token(&percept, &lib, &cfg, Some("test-token"));
    let rule = rule_respond(&percept, &lib);
    ensure!(
        out.sequence == rule.sequence,
        "fallback {} differs from rules",
        out.sequence.to_text()
    );
    ensure!(
        out.repairs.iter().any(|n| matches!(n, RepairNote::FallbackUsed { .. })),
        "no fallback note in {:?}",
        out.repairs
    );
    Ok("one repair after malformed reply, unreachable endpoint falls back".into())
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("geometry", geometry),
        ("fk_oracle", fk_oracle),
        ("cable_mapping", cable_mapping),
        ("dsl", dsl),
        ("scenario_loop", scenario_loop),
        ("scheduler_timing", scheduler_timing),
        ("gesture_safety", gesture_safety),
        ("actuation", actuation),
        ("codec", codec),
        ("llm_path", llm_path),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, check) in criteria {
        let result =
            catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| Err(format!("panicked: {}", panic_text(&*p))));
        match result {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(reason) => {
                failed += 1;
                println!("FAIL {name}: {reason}");
            }
        }
    }
    let _ = std::panic::take_hook();
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

fn panic_text(p: &(dyn std::any::Any + Send)) -> String {
    p.downcast_ref::<String>()
        .cloned()
        .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
        .unwrap_or_else(|| "unknown panic".into())
}
