#ifndef VFPBENCH_H
#define VFPBENCH_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum VfpStatus {
  VFP_STATUS_OK = 0,
  VFP_STATUS_NULL_POINTER = 1,
  VFP_STATUS_INVALID_ARGUMENT = 2,
  VFP_STATUS_ADDRESS_NACK = 3,
  VFP_STATUS_WRITE_REJECTED = 4,
  VFP_STATUS_CONFIG_REFUSED = 5,
  VFP_STATUS_NOT_CONFIGURED = 6,
  VFP_STATUS_BAD_INDEX = 7,
  VFP_STATUS_BAD_MAGIC = 8,
  VFP_STATUS_BAD_VERSION = 9,
  VFP_STATUS_BAD_CHECKSUM = 10,
  VFP_STATUS_UNKNOWN_BOARD_TYPE = 11,
  VFP_STATUS_BAD_CAPABILITIES = 12,
  VFP_STATUS_SCRIPT_PARSE = 13,
  VFP_STATUS_SCRIPT_FAILED = 14,
  VFP_STATUS_PANIC = 15,
} VfpStatus;

typedef enum VfpBoardType {
  VFP_BOARD_TYPE_UNKNOWN = 0,
  VFP_BOARD_TYPE_XC2V250 = 2,
  VFP_BOARD_TYPE_XC2V1000 = 4,
} VfpBoardType;

typedef enum VfpVideoInput {
  VFP_VIDEO_INPUT_VID0 = 0,
  VFP_VIDEO_INPUT_VID1 = 1,
} VfpVideoInput;

typedef enum VfpImageFormat {
  VFP_IMAGE_FORMAT_PPM = 0,
  VFP_IMAGE_FORMAT_BMP = 1,
} VfpImageFormat;

/**
 * Opaque board handle.
 */
typedef struct VfpBoard VfpBoard;

typedef struct VfpPciIdentity {
  uint16_t vendor_id;
  uint16_t device_id;
  uint16_t subsystem_vendor_id;
  uint16_t subsystem_device_id;
  bool driver_bound;
  uint8_t board_type;
} VfpPciIdentity;

/**
 * Byte buffer owned by the library.
 */
typedef struct VfpBuffer {
  uint8_t *data;
  size_t len;
} VfpBuffer;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Thread-local message for the last failing call, or NULL. Valid until the
 * next call on the same thread.
 */
const char *vfp_last_error(void);

/**
 * Static name of a status code.
 */
const char *vfp_status_name(enum VfpStatus status);

/**
 * Creates a board. Returns NULL for `VFP_BOARD_TYPE_UNKNOWN`.
 */
struct VfpBoard *vfp_board_new(enum VfpBoardType board_type, bool uninitialized);

void vfp_board_free(struct VfpBoard *board);

/**
 * One bus transaction. `read_buf` must hold `read_len` bytes; it may be NULL
 * when `read_len` is 0, as may `write` when `write_len` is 0.
 */
enum VfpStatus vfp_i2c_transaction(const struct VfpBoard *board,
                                   uint8_t address,
                                   const uint8_t *write,
                                   size_t write_len,
                                   uint8_t *read_buf,
                                   size_t read_len);

/**
 * Writes responding addresses to `out` (capacity `cap`) and the total count
 * to `count`. Returns `InvalidArgument` if `cap` is too small; `count` is
 * still set.
 */
enum VfpStatus vfp_i2c_scan(const struct VfpBoard *board, uint8_t *out, size_t cap, size_t *count);

enum VfpStatus vfp_pci_identify(const struct VfpBoard *board, struct VfpPciIdentity *out);

/**
 * Configures the FPGA from the EEPROM board type. `model_code` (optional)
 * receives the status-register code (0x02 / 0x04).
 */
enum VfpStatus vfp_load_fpga(const struct VfpBoard *board, uint8_t *model_code);

/**
 * `index` < 0 applies `on` to all LEDs. `mask` (optional) receives the result.
 */
enum VfpStatus vfp_led_set(const struct VfpBoard *board, int32_t index, bool on, uint8_t *mask);

enum VfpStatus vfp_select_input(const struct VfpBoard *board, enum VfpVideoInput input);

/**
 * Grabs one frame and serializes it. Release `out` with `vfp_buffer_free`.
 */
enum VfpStatus vfp_capture_frame(const struct VfpBoard *board,
                                 enum VfpImageFormat format,
                                 struct VfpBuffer *out,
                                 uint64_t *counter);

void vfp_buffer_free(struct VfpBuffer *buf);

/**
 * Copies the 256 EEPROM bytes into `out`.
 */
enum VfpStatus vfp_board_eeprom(const struct VfpBoard *board, uint8_t *out);

/**
 * Encodes a stock descriptor into `out` (256 bytes).
 */
enum VfpStatus vfp_eeprom_encode(enum VfpBoardType board_type,
                                 uint16_t subsystem_vendor_id,
                                 uint16_t subsystem_device_id,
                                 uint8_t *out);

/**
 * Validates 256 bytes at `bytes`; returns the first failing check.
 */
enum VfpStatus vfp_eeprom_validate(const uint8_t *bytes);

/**
 * Hexdump of 256 bytes. Release with `vfp_string_free`.
 */
char *vfp_eeprom_hexdump(const uint8_t *bytes);

/**
 * Parses and runs a register-debugger script on the board. When `report` is
 * non-NULL it receives the formatted report (release with `vfp_string_free`).
 */
enum VfpStatus vfp_urd_run(const struct VfpBoard *board, const char *script, char **report);

void vfp_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VFPBENCH_H */
