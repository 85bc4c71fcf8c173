// Perceptual hashes of an image, its JPEG re-encode and a rescaled copy,
// compared with an unrelated image.
//
//     cargo run --example fingerprint_images

use telemonitor::fingerprint::{hamming, phash64_bytes};
use telemonitor::fixture::{downscale_80, encode_jpeg, encode_png, synth_image};

pub fn run() -> telemonitor::Result<(u32, u32)> {
    let img = synth_image(42);
    let original = phash64_bytes(&encode_png(&img)?)?;
    let jpeg = phash64_bytes(&encode_jpeg(&img, 75)?)?;
    let small = phash64_bytes(&encode_png(&downscale_80(&img))?)?;
    let other = phash64_bytes(&encode_png(&synth_image(43))?)?;

    println!("original  {original}");
    println!("jpeg q75  {jpeg}  distance {}", hamming(original, jpeg));
    println!("80% size  {small}  distance {}", hamming(original, small));
    println!("unrelated {other}  distance {}", hamming(original, other));
    let near = hamming(original, jpeg).max(hamming(original, small));
    Ok((near, hamming(original, other)))
}

fn main() -> telemonitor::Result<()> {
    run()?;
    Ok(())
}
