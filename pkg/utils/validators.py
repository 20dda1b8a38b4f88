import os

from .errors import ConfigError, DataError
from .file_handler import IMAGE_KINDS, DatasetHandler


class ConfigValidator:
    """
    Range checks for parsed run-config and corpus-spec values.
    """

    @classmethod
    def validate_run_values(cls, values):
        """
        Validate run-config values.

        Args:
            values (dict): Parsed key/values of a run config

        Raises:
            ConfigError: On the first out-of-range value
        """
        cls._require(values['SIDE_H'] >= 1 and values['SIDE_W'] >= 1, 'SIDE_H and SIDE_W must be >= 1')
        cls._require(len(values['HIDDEN_DIMS']) >= 1 and min(values['HIDDEN_DIMS']) >= 1,
                     'HIDDEN_DIMS must list positive widths')
        cls._require(values['LATENT_DIM'] >= 1, 'LATENT_DIM must be >= 1')
        cls._require(values['KL_WEIGHT'] >= 0, 'KL_WEIGHT must be >= 0')
        cls._require(values['ETA1'] >= 0 and values['ETA2'] >= 0, 'ETA1 and ETA2 must be >= 0')
        cls._require(values['MARGIN'] is None or values['MARGIN'] > 0, 'MARGIN must be positive')
        cls._require(values['ROUNDS'] >= 1, 'ROUNDS must be >= 1')
        cls._require(values['BATCH_SIZE'] >= 1, 'BATCH_SIZE must be >= 1')
        cls._require(values['SVM_GAMMA'] == 'scale' or values['SVM_GAMMA'] > 0, 'SVM_GAMMA must be positive or scale')
        cls._require(values['SVM_C'] > 0, 'SVM_C must be positive')
        cls._require(values['SVM_TOL'] > 0, 'SVM_TOL must be positive')
        cls._require(values['SVM_MAX_PASSES'] >= 1, 'SVM_MAX_PASSES must be >= 1')
        cls._require(values['SVM_CLASS_WEIGHT_NEG'] == 'auto' or values['SVM_CLASS_WEIGHT_NEG'] > 0,
                     'SVM_CLASS_WEIGHT_NEG must be positive or auto')
        for key in ('TRAIN_GENUINE', 'RANDOM_PER_WRITER'):
            cls._require(values[key] is None or values[key] >= 1, f'{key} must be >= 1')
        for key in ('TEST_GENUINE', 'TEST_SKILLED', 'RANDOM_POOL_WRITERS', 'EVAL_WRITERS'):
            cls._require(values[key] is None or values[key] >= 0, f'{key} must be >= 0')

    @classmethod
    def validate_corpus_values(cls, values):
        """
        Validate a synthetic corpus spec.

        Args:
            values (dict): Parsed key/values of a corpus spec

        Raises:
            ConfigError: On the first out-of-range value
        """
        cls._require(values['N_WRITERS'] >= 2, 'N_WRITERS must be >= 2')
        cls._require(values['GENUINE_PER_WRITER'] >= 1, 'GENUINE_PER_WRITER must be >= 1')
        cls._require(values['SKILLED_PER_WRITER'] >= 0, 'SKILLED_PER_WRITER must be >= 0')
        cls._require(0 < values['JITTER_GENUINE'] < values['JITTER_SKILLED'],
                     'jitter must satisfy 0 < JITTER_GENUINE < JITTER_SKILLED')
        cls._require(values['CANVAS_H'] >= 16 and values['CANVAS_W'] >= 16, 'canvas must be at least 16x16')

    @staticmethod
    def _require(condition, message):
        if not condition:
            raise ConfigError(message)


class DatasetValidator:
    """
    Layout, readability and count checks for a signature dataset.
    """

    @classmethod
    def validate(cls, root, min_genuine=1, min_skilled=0, check_images=True):
        """
        Validate a dataset directory.

        Args:
            root (str): Dataset root
            min_genuine (int): Genuine images a writer needs for the protocol
            min_skilled (int): Skilled forgeries a writer needs for the protocol
            check_images (bool): Decode every image

        Returns:
            dict: Validation results with inventory, warnings and errors
        """
        results = {
            'valid': True,
            'root': root,
            'writer_count': 0,
            'image_count': 0,
            'writers': {},
            'short_writers': [],
            'warnings': [],
            'errors': [],
        }

        handler = DatasetHandler(root)
        if not handler.exists():
            results['errors'].append(f"missing 'writers' directory under {root}")
            results['valid'] = False
            return results

        writers = handler.list_writers()
        results['writer_count'] = len(writers)
        if not writers:
            results['errors'].append('no writer directories found')

        seen = {}
        for writer in writers:
            key = writer.lower()
            if key in seen:
                results['errors'].append(f"writer ids '{seen[key]}' and '{writer}' collide")
            seen[key] = writer

            counts = {}
            for kind in IMAGE_KINDS:
                images = handler.list_images(writer, kind)
                counts[kind] = len(images)
                results['image_count'] += len(images)
                if check_images:
                    for _, path in images:
                        try:
                            handler.read_image(path)
                        except DataError as e:
                            results['errors'].append(str(e))
                results['warnings'] += cls._stray_files(handler, writer, kind)
            results['writers'][writer] = counts

            if counts['genuine'] < min_genuine or counts['skilled'] < min_skilled:
                results['short_writers'].append(writer)
                results['warnings'].append(
                    f"writer {writer} has {counts['genuine']} genuine / {counts['skilled']} skilled, "
                    f"protocol needs {min_genuine} / {min_skilled}"
                )

        results['valid'] = not results['errors']
        return results

    @staticmethod
    def _stray_files(handler, writer, kind):
        directory = os.path.join(handler.writers_path, writer, kind)
        if not os.path.isdir(directory):
            return []
        return [
            f"ignoring non-image file {os.path.join(directory, name)}"
            for name in sorted(os.listdir(directory))
            if not handler.allowed_file(name) and not name.startswith('.')
        ]
