use proptest::prelude::*;
use rfdepth_core::io::{
    decode_pfm, decode_pgm, decode_tmat, encode_pfm, encode_pgm, encode_tmat, read_pfm, read_tmat, write_pfm,
    write_tmat, ByteImage, FloatImage,
};
use rfdepth_core::TransportMatrix;

fn matrix() -> impl Strategy<Value = TransportMatrix> {
    (1usize..8, 1usize..8).prop_flat_map(|(r, c)| {
        prop::collection::vec(prop::num::f32::POSITIVE | prop::num::f32::ZERO, r * c)
            .prop_map(move |v| TransportMatrix::from_dense(r, c, v.into_iter().map(f64::from).collect()).unwrap())
    })
}

fn image() -> impl Strategy<Value = FloatImage> {
    (1usize..9, 1usize..9).prop_flat_map(|(w, h)| {
        prop::collection::vec(any::<f32>(), w * h).prop_map(move |data| FloatImage {
            width: w,
            height: h,
            data,
        })
    })
}

fn bits(data: &[f32]) -> Vec<u32> {
    data.iter().map(|v| v.to_bits()).collect()
}

proptest! {
    #[test]
    fn tmat_is_bit_exact(t in matrix()) {
        let bytes = encode_tmat(&t);
        let back = decode_tmat(&bytes).unwrap();
        prop_assert_eq!(&back, &t);
        prop_assert_eq!(encode_tmat(&back), bytes);
    }

    #[test]
    fn pfm_is_bit_exact(img in image()) {
        let back = decode_pfm(&encode_pfm(&img)).unwrap();
        prop_assert_eq!((back.width, back.height), (img.width, img.height));
        prop_assert_eq!(bits(&back.data), bits(&img.data));
    }

    #[test]
    fn pgm_is_exact(w in 1usize..9, h in 1usize..9, seed in any::<u64>()) {
        let data: Vec<u8> = (0..w * h).map(|k| (seed.rotate_left(k as u32) & 0xff) as u8).collect();
        let img = ByteImage { width: w, height: h, data };
        prop_assert_eq!(decode_pgm(&encode_pgm(&img)).unwrap(), img);
    }
}

#[test]
fn files_round_trip_and_leave_no_temporaries() {
    let dir = tempfile::tempdir().unwrap();
    let t = TransportMatrix::from_dense(2, 2, vec![0.25, 0.0, 1.0 / 3.0, 2.0]).unwrap();
    let tp = dir.path().join("t.tmat");
    write_tmat(&tp, &t).unwrap();
    assert_eq!(read_tmat(&tp).unwrap(), t.rounded_to_f32());
    let img = FloatImage {
        width: 3,
        height: 2,
        data: vec![1.0, f32::NAN, -2.5, 0.0, 1e-30, f32::INFINITY],
    };
    let ip = dir.path().join("z.pfm");
    write_pfm(&ip, &img).unwrap();
    assert_eq!(bits(&read_pfm(&ip).unwrap().data), bits(&img.data));
    let names: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names.len(), 2, "{names:?}");
}

#[test]
fn big_endian_pfm_and_comments_are_read() {
    let mut bytes = b"Pf\n# depth\n2 1\n1.0\n".to_vec();
    bytes.extend_from_slice(&1.5f32.to_be_bytes());
    bytes.extend_from_slice(&(-4f32).to_be_bytes());
    assert_eq!(decode_pfm(&bytes).unwrap().data, vec![1.5, -4.0]);
}

#[test]
fn malformed_headers_are_rejected() {
    assert!(decode_pfm(b"PF\n1 1\n-1.0\n\0\0\0\0").is_err());
    assert!(decode_pfm(b"Pf\n1 1\n0\n\0\0\0\0").is_err());
    assert!(decode_pfm(b"Pf\n2 1\n-1.0\n\0\0\0\0").is_err());
    assert!(decode_tmat(b"TMAT\x02\0\0\0\x01\0\0\0\x01\0\0\0\0\0\0\0").is_err());
}
