import os
import shutil

from utils.validators import DatasetValidator


def test_synthetic_corpus_is_valid(small_corpus):
    results = DatasetValidator.validate(small_corpus, min_genuine=5, min_skilled=3)
    assert results['valid']
    assert results['writer_count'] == 4
    assert results['image_count'] == 4 * (6 + 3)
    assert results['writers']['w001'] == {'genuine': 6, 'skilled': 3}
    assert results['short_writers'] == []


def test_short_writer_listed(small_corpus, tmp_path):
    root = str(tmp_path / 'data')
    shutil.copytree(small_corpus, root)
    genuine = os.path.join(root, 'writers', 'w002', 'genuine')
    for name in sorted(os.listdir(genuine))[1:]:
        os.remove(os.path.join(genuine, name))

    results = DatasetValidator.validate(root, min_genuine=5)
    assert results['valid']
    assert results['short_writers'] == ['w002']
    assert any('w002' in w for w in results['warnings'])


def test_corrupt_image_names_the_file(small_corpus, tmp_path):
    root = str(tmp_path / 'data')
    shutil.copytree(small_corpus, root)
    broken = os.path.join(root, 'writers', 'w003', 'skilled', 'w003_s01.png')
    with open(broken, 'wb') as f:
        f.write(b'not a png')

    results = DatasetValidator.validate(root)
    assert not results['valid']
    assert any(broken in e for e in results['errors'])


def test_stray_files_warned(small_corpus, tmp_path):
    root = str(tmp_path / 'data')
    shutil.copytree(small_corpus, root)
    with open(os.path.join(root, 'writers', 'w001', 'genuine', 'notes.txt'), 'w') as f:
        f.write('scan log')

    results = DatasetValidator.validate(root)
    assert results['valid']
    assert any('notes.txt' in w for w in results['warnings'])


def test_missing_writers_directory(tmp_path):
    results = DatasetValidator.validate(str(tmp_path))
    assert not results['valid']
    assert "'writers'" in results['errors'][0]


def test_placeholder_layout_counts(placeholder_dataset):
    root = placeholder_dataset(3, 4, 2)
    results = DatasetValidator.validate(root, min_genuine=4, min_skilled=2, check_images=False)
    assert results['valid']
    assert results['image_count'] == 3 * 6
