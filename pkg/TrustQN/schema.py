from TrustQN.attribute import ConfigAttribute
from TrustQN.exceptions import ConfigError, ConfigTypeError, ConfigValueError


# The ConfigSchema class is used to store and manage attributes for a JSON run configuration.
class ConfigSchema:
    def __init__(self, allow_unknown=False):
        """
        The constructor initializes an empty schema.

        :param allow_unknown: The `allow_unknown` parameter accepts keys that no attribute describes,
        defaults to False (optional)
        """
        self.attributes = []
        self.attribute_map = {}
        self.allow_unknown = allow_unknown

    def add_attributes(self, attributes):
        """
        The `add_attributes` function adds attributes to the schema, checking that each attribute is of
        type ConfigAttribute.

        :param attributes: The `attributes` parameter is a list of `ConfigAttribute` objects
        :return: The method `add_attributes` is returning `self`.
        """
        try:
            for attribute in attributes:
                if not isinstance(attribute, ConfigAttribute):
                    raise ConfigTypeError(
                        f"{attribute} must be of type ConfigAttribute.")
                if attribute.get_attribute_name() in self.attribute_map:
                    raise ConfigValueError(
                        f"Attribute '{attribute.get_attribute_name()}' is declared twice.")
                self.attributes.append(attribute)
                self.attribute_map[attribute.get_attribute_name()] = attribute
            return self
        except ConfigError:
            raise
        except Exception as e:
            raise ConfigError(f"Error adding attributes: {e}")

    def validate(self, item):
        """
        The `validate` function checks that the given `item` has every required attribute, no unknown
        keys, values of the declared types and values that pass their validators. All problems are
        collected into one error.

        :param item: The `item` parameter is a dictionary read from a configuration document
        :return: a boolean value of True. Raises `ConfigTypeError` when only types are wrong and
        `ConfigValueError` for every other problem.
        """
        if not isinstance(item, dict):
            raise ConfigTypeError(f"Configuration must be a JSON object, got {type(item).__name__}.")
        missing_attributes = []
        unknown_attributes = []
        type_mismatch_attributes = []
        validation_failed_attributes = []

        for attribute in self.attributes:
            attribute_name = attribute.get_attribute_name()
            if attribute_name not in item:
                if attribute.is_attribute_required():
                    missing_attributes.append(attribute_name)
                continue
            problem = attribute.check_value(item[attribute_name])
            if problem == "type":
                type_mismatch_attributes.append(
                    f"{attribute_name} (expected {attribute.get_attribute_type()})")
            elif problem == "validation":
                validation_failed_attributes.append(f"{attribute_name}={item[attribute_name]!r}")

        if not self.allow_unknown:
            unknown_attributes = sorted(key for key in item if key not in self.attribute_map)

        error_messages = []
        if missing_attributes:
            error_messages.append(
                f"Missing required attributes: {', '.join(missing_attributes)}")
        if unknown_attributes:
            error_messages.append(
                f"Unknown attributes: {', '.join(unknown_attributes)}")
        if type_mismatch_attributes:
            error_messages.append(
                f"Type mismatch for attributes: {', '.join(type_mismatch_attributes)}")
        if validation_failed_attributes:
            error_messages.append(
                f"Validation failed for attributes: {', '.join(validation_failed_attributes)}")

        if error_messages:
            only_types = len(error_messages) == 1 and type_mismatch_attributes
            error_class = ConfigTypeError if only_types else ConfigValueError
            raise error_class('\n'.join(error_messages))

        return True

    def fill_defaults(self, item):
        """
        The `fill_defaults` function fills in missing attributes in an item dictionary with their default
        values.

        :param item: The `item` parameter is a dictionary read from a configuration document
        :return: the same dictionary, completed in place.
        """
        for attribute in self.attributes:
            attribute_name = attribute.get_attribute_name()
            if attribute_name not in item and not attribute.is_attribute_required():
                item[attribute_name] = attribute.get_attribute_default()
        return item

    def get_schema(self):
        """
        The function `get_schema` returns a list of attribute information for each attribute in the
        schema.
        """
        return [attribute.get_attribute_info() for attribute in self.attributes]

    def get_attribute_map(self):
        return self.attribute_map
