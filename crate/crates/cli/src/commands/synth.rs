//! `synth`: a self-consistent project to exercise every other command.

use crate::config::PipelineConfig;
use crate::error::{CliError, Result};
use crate::fsutil::write_atomic;
use crate::SynthArgs;
use image::{ImageFormat, RgbImage};
use orchard_core::ingest::{write_detections_csv, write_voc_document};
use orchard_core::synth::{
    generate_scene, noisy_detections, planted_annotations, PlantedBoxes, SceneSpec, DSM_FILE, DTM_FILE, OFFSET_FILE,
    PMATRIX_FILE, ROWS_FILE,
};
use std::io::Cursor;
use std::path::PathBuf;

pub const CONFIG_FILE: &str = "orchard.toml";
pub const DETECTIONS_FILE: &str = "detections.csv";

fn gradient_jpeg(width: u32, height: u32, index: usize) -> Vec<u8> {
    let shade = (index * 37 % 256) as u8;
    let img = RgbImage::from_fn(width, height, |x, y| {
        image::Rgb([(x * 255 / width.max(1)) as u8, (y * 255 / height.max(1)) as u8, shade])
    });
    let mut bytes = Vec::new();
    img.write_to(&mut Cursor::new(&mut bytes), ImageFormat::Jpeg).expect("in-memory JPEG encode");
    bytes
}

pub fn run(cfg: PipelineConfig, a: &SynthArgs) -> Result<()> {
    if a.downscale == 0 {
        return Err(CliError::invalid("downscale must be at least 1"));
    }
    let spec = SceneSpec { seed: cfg.seed, ..SceneSpec::default() }.downscaled(a.downscale);
    let scene = generate_scene(&spec).map_err(CliError::invalid)?;
    let dir = cfg.output_dir();
    let (w, h) = (scene.intrinsics.image_width, scene.intrinsics.image_height);

    let f = scene.files();
    for (name, text) in [
        (PMATRIX_FILE, &f.pmatrix),
        (OFFSET_FILE, &f.offset),
        (DTM_FILE, &f.dtm),
        (DSM_FILE, &f.dsm),
        (ROWS_FILE, &f.rows),
    ] {
        write_atomic(&dir.join(name), text.as_bytes())?;
    }
    if !a.no_images {
        for (i, pose) in scene.poses.iter().enumerate() {
            write_atomic(&dir.join("images").join(&pose.image_name), &gradient_jpeg(w, h, i))?;
        }
    }

    let planted = PlantedBoxes { seed: cfg.seed, ..PlantedBoxes::default() };
    let docs = planted_annotations(&planted);
    for doc in &docs {
        let stem = doc.filename.rsplit_once('.').map_or(doc.filename.as_str(), |(s, _)| s);
        write_atomic(&dir.join("annotations").join(format!("{stem}.xml")), write_voc_document(doc).as_bytes())?;
    }
    let dets = noisy_detections(&docs, 0.2, 4.0, 3, cfg.seed);
    write_atomic(&dir.join(DETECTIONS_FILE), write_detections_csv(&dets).as_bytes())?;

    let mut project = PipelineConfig { seed: cfg.seed, ..PipelineConfig::default() };
    let rel = |s: &str| Some(PathBuf::from(s));
    project.paths.pmatrix = rel(PMATRIX_FILE);
    project.paths.offset = rel(OFFSET_FILE);
    project.paths.dtm = rel(DTM_FILE);
    project.paths.dsm = rel(DSM_FILE);
    project.paths.rows = rel(ROWS_FILE);
    project.paths.images = rel("images");
    project.paths.annotations = rel("annotations");
    project.paths.detections = rel(DETECTIONS_FILE);
    project.paths.output = rel("out");
    project.camera.image_width = w;
    project.camera.image_height = h;
    write_atomic(&dir.join(CONFIG_FILE), project.to_toml().as_bytes())?;

    println!(
        "wrote {} trees, {} images, {} annotation files to {}",
        scene.trees.len(),
        scene.poses.len(),
        docs.len(),
        dir.display()
    );
    Ok(())
}
