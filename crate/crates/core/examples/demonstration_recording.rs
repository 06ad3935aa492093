//! Records a demonstration dataset while a scripted expert toggles one
//! robot into wall-following, then reads it back.

use apfwf::dataset::read_dataset;
use apfwf::server::Session;
use apfwf::sim::{generate_instance, Layout};

fn main() -> apfwf::Result<()> {
    let path = std::env::temp_dir().join("apfwf_demo.jsonl");
    let mut session = Session::new(generate_instance(&Layout::Swap, 6, 0)?)?;
    session.start_recording(path.clone())?;
    for t in 0..120 {
        if t == 30 || t == 60 {
            let mode = session.toggle(0)?;
            println!("t={t}: robot 0 override {mode:?}");
        }
        session.advance()?;
    }
    let written = session.stop_recording()?.unwrap_or(0);

    let (header, records) = read_dataset(&path)?;
    let wf = records.iter().filter(|r| r.label == 1).count();
    println!(
        "{written} records for robots {:?}, {} features each, {wf} labelled wall-following",
        header.controlled_ids,
        header.observation_len()
    );
    println!("dataset at {}", path.display());
    Ok(())
}
