#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "recflash/flash_model.hpp"
#include "recflash/kv_config.hpp"

using namespace recflash;

TEST(Timing, CommandAddressGolden) {
  TimingParams t;
  EXPECT_NEAR(command_address_time(t), 0.115, 1e-9);
}

TEST(Timing, DataOutGolden) {
  TimingParams t;
  EXPECT_NEAR(data_out_time(t, 128), 2.58, 1e-9);
  EXPECT_NEAR(data_out_time(t, 0), 0.02, 1e-12);
}

TEST(Timing, WorkedExamples) {
  TimingParams t;
  // two vectors in two separate pages on one plane
  EXPECT_NEAR(2 * single_page_read_time(t, 1, 128, 16384), 55.39, 1e-9);
  // both vectors in one page
  EXPECT_NEAR(single_page_read_time(t, 2, 128, 16384), 30.275, 1e-9);
}

TEST(Timing, TicksMatchMicroseconds) {
  TimingParams t;
  TimingTicks k(t);
  EXPECT_EQ(k.command_address().count(), 115'000);
  EXPECT_EQ(k.data_out(128).count(), 2'580'000);
  EXPECT_EQ(k.r.count(), 25'000'000);
}

TEST(Timing, SinglePageRejectsOverflowingVectors) {
  TimingParams t;
  EXPECT_THROW(single_page_read_time(t, 129, 128, 16384), std::invalid_argument);
  EXPECT_THROW(single_page_read_time(t, 0, 128, 16384), std::invalid_argument);
}

TEST(Timing, ValidationRejectsNonPositive) {
  TimingParams t;
  t.t_rc = 0;
  EXPECT_THROW(t.validate(), std::invalid_argument);
  t = {};
  t.t_r = -1;
  EXPECT_THROW(t.validate(), std::invalid_argument);
}

TEST(FlashConfig, PresetsValidate) {
  for (auto n : {"slc", "tlc", "qlc"}) EXPECT_NO_THROW(flash_preset(n).validate()) << n;
  EXPECT_THROW(flash_preset("plc"), std::invalid_argument);
  EXPECT_EQ(flash_preset("TLC").cell_type, CellType::TLC);
}

TEST(FlashConfig, VectorMustTilePage) {
  auto c = flash_preset("tlc");
  EXPECT_NO_THROW(c.validate_for_vector(128));
  EXPECT_THROW(c.validate_for_vector(100), std::invalid_argument);
  EXPECT_THROW(c.validate_for_vector(32768), std::invalid_argument);
}

TEST(FlashConfig, SerializeRoundTripRandom) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.001, 500.0);
  for (int i = 0; i < 200; ++i) {
    auto c = flash_preset(i % 3 == 0 ? "slc" : i % 3 == 1 ? "tlc" : "qlc");
    c.timing.t_r = u(rng);
    c.timing.t_rc = u(rng) / 1000;
    c.page_read_energy = u(rng);
    c.channels = 1 + static_cast<std::uint32_t>(rng() % 8);
    c.reserved_block_fraction = 0.01 * static_cast<double>(1 + rng() % 20);
    auto back = parse_flash_config(serialize_flash_config(c));
    EXPECT_EQ(back, c);
  }
}

TEST(FlashConfig, ParseErrorsCarryLine) {
  try {
    parse_flash_config("page_size = 16384\nbogus_key = 3\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(parse_flash_config("page_size = abc\n"), ConfigError);
}

TEST(FlashConfig, AddressValidation) {
  auto c = flash_preset("tlc");
  PhysicalAddress a;
  EXPECT_NO_THROW(validate_address(c, a, 128));
  a.offset = 16384 - 64;
  EXPECT_THROW(validate_address(c, a, 128), std::out_of_range);
  a = {};
  a.block = c.blocks_per_plane;
  EXPECT_THROW(validate_address(c, a, 128), std::out_of_range);
  a = {};
  a.plane = c.planes_per_die;
  EXPECT_THROW(validate_address(c, a, 128), std::out_of_range);
}

TEST(Energy, LinearInPageReads) {
  auto c = flash_preset("tlc");
  EXPECT_DOUBLE_EQ(read_energy(c, 0), 0.0);
  EXPECT_DOUBLE_EQ(read_energy(c, 10), 10 * c.page_read_energy);
}

TEST(Energy, RemapCost) {
  auto c = flash_preset("tlc");
  auto r = remap_cost(c, 3, 2);
  EXPECT_DOUBLE_EQ(r.latency_us, 3 * (c.timing.t_r + c.page_program_latency) + 2 * c.block_erase_latency * 1000);
  EXPECT_DOUBLE_EQ(r.energy_uj, 3 * (c.page_read_energy + c.page_program_energy) + 2 * c.block_erase_energy);
  auto z = remap_cost(c, 0, 0);
  EXPECT_EQ(z.latency_us, 0.0);
}

TEST(KvConfig, Basics) {
  auto e = parse_kv("# comment\n a = 1 \n\nb= x, y ,z\n");
  ASSERT_EQ(e.size(), 2u);
  EXPECT_EQ(e[0].key, "a");
  EXPECT_EQ(kv_uint(e[0]), 1u);
  EXPECT_EQ(kv_list(e[1]), (std::vector<std::string>{"x", "y", "z"}));
  EXPECT_THROW(parse_kv("a = 1\na = 2\n"), ConfigError);
  EXPECT_THROW(parse_kv("novalue\n"), ConfigError);
  EXPECT_THROW(kv_double({"k", "1.5x", 3}), ConfigError);
  EXPECT_THROW(kv_list({"k", "a,,b", 3}), ConfigError);
}

TEST(KvConfig, FormatDoubleRoundTrips) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 1000; ++i) {
    double v = std::ldexp(double(rng() >> 11), -int(rng() % 80));
    EXPECT_EQ(std::stod(format_double(v)), v);
  }
}
